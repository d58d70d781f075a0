#include <cmath>
#include <cstdio>
#include <limits>

#include "json.hpp"

#include "shapead/error.hpp"
#include "shapead/reduced.hpp"

namespace shapead {

namespace {

std::vector<double> rates(const std::vector<double>& R, const std::vector<double>& h) {
  std::vector<double> out;
  for (std::size_t k = 1; k < R.size(); ++k) {
    if (R[k] < kTaylorUnderflow || R[k - 1] < kTaylorUnderflow) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      out.push_back(std::log(R[k] / R[k - 1]) / std::log(h[k] / h[k - 1]));
    }
  }
  return out;
}

nlohmann::json nan_safe(const std::vector<double>& v) {
  nlohmann::json a = nlohmann::json::array();
  for (double x : v) {
    if (std::isfinite(x)) a.push_back(x);
    else a.push_back(nullptr);
  }
  return a;
}

double extreme_rate(const TaylorResult& r, int order, bool lowest) {
  const std::vector<double>* v = order == 0 ? &r.rate0 : order == 1 ? &r.rate1 : &r.rate2;
  double best = std::numeric_limits<double>::quiet_NaN();
  for (double x : *v) {
    if (std::isnan(x)) continue;
    if (std::isnan(best) || (lowest ? x < best : x > best)) best = x;
  }
  return best;
}

}  // namespace

double TaylorResult::min_rate(int order) const { return extreme_rate(*this, order, true); }
double TaylorResult::max_rate(int order) const { return extreme_rate(*this, order, false); }

std::string TaylorResult::to_json() const {
  nlohmann::json j;
  j["h"] = h;
  j["R0"] = R0;
  j["R1"] = R1;
  j["R2"] = second_order ? nlohmann::json(R2) : nlohmann::json(nullptr);
  j["rate0"] = nan_safe(rate0);
  j["rate1"] = nan_safe(rate1);
  j["rate2"] = second_order ? nan_safe(rate2) : nlohmann::json(nullptr);
  j["J"] = J;
  j["dJdm"] = dJdm;
  if (second_order) j["dmHdm"] = dmHdm;
  j["notes"] = notes;
  return j.dump(2);
}

std::string TaylorResult::to_text() const {
  std::string out;
  char line[256];
  auto rate = [](const std::vector<double>& r, std::size_t k) -> std::string {
    if (k == 0) return "-";
    double x = r[k - 1];
    if (std::isnan(x)) return "nan";
    char b[32];
    std::snprintf(b, sizeof b, "%.3f", x);
    return b;
  };
  std::snprintf(line, sizeof line, "%-11s %-11s %-7s %-11s %-7s", "h", "R0", "rate", "R1", "rate");
  out += line;
  if (second_order) {
    std::snprintf(line, sizeof line, " %-11s %-7s", "R2", "rate");
    out += line;
  }
  out += "\n";
  for (std::size_t k = 0; k < h.size(); ++k) {
    std::snprintf(line, sizeof line, "%-11.3e %-11.3e %-7s %-11.3e %-7s", h[k], R0[k], rate(rate0, k).c_str(),
                  R1[k], rate(rate1, k).c_str());
    out += line;
    if (second_order) {
      std::snprintf(line, sizeof line, " %-11.3e %-7s", R2[k], rate(rate2, k).c_str());
      out += line;
    }
    out += "\n";
  }
  for (const auto& n : notes) out += "note: " + n + "\n";
  return out;
}

TaylorResult taylor_test(ReducedFunctional& rf, const ControlValues& values, const ControlValues& directions,
                         double h0, int halvings, bool second_order) {
  if (!(h0 > 0.0)) throw Error("taylor_test: h0 must be positive");
  if (halvings < 1) throw Error("taylor_test: need at least one halving");
  TaylorResult r;
  r.second_order = second_order;
  r.J = rf(values);
  r.dJdm = pairing(rf.derivative(), directions);
  if (second_order) r.dmHdm = pairing(rf.hessian(directions), directions);

  for (int k = 0; k <= halvings; ++k) {
    const double h = h0 / std::pow(2.0, k);
    const double Jh = rf(axpy(h, directions, values));
    r.h.push_back(h);
    r.R0.push_back(std::abs(Jh - r.J));
    r.R1.push_back(std::abs(Jh - r.J - h * r.dJdm));
    if (second_order) r.R2.push_back(std::abs(Jh - r.J - h * r.dJdm - 0.5 * h * h * r.dmHdm));
  }
  r.rate0 = rates(r.R0, r.h);
  r.rate1 = rates(r.R1, r.h);
  if (second_order) r.rate2 = rates(r.R2, r.h);
  bool underflow = false;
  for (const auto* v : {&r.rate0, &r.rate1, &r.rate2})
    for (double x : *v) underflow = underflow || std::isnan(x);
  if (underflow) r.notes.push_back("remainders below 1e-15 are round-off; their rates are reported as NaN");
  rf(values);
  return r;
}

}  // namespace shapead
