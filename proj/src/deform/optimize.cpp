#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "shapead/deform.hpp"
#include "shapead/error.hpp"

namespace shapead {

namespace {

struct Gradient {
  ControlValues r;  // Riesz representative per control
  double norm = 0.0;
};

Gradient represent(const RieszMap& riesz, const ControlValues& g) {
  Gradient out;
  double n2 = 0.0;
  for (const auto& gi : g) {
    Eigen::VectorXd b = gi;
    zero_entries(b, riesz.constrained());
    out.r.push_back(riesz.representation(gi));
    n2 += b.dot(out.r.back());
  }
  out.norm = std::sqrt(std::max(0.0, n2));
  return out;
}

double quality(const DescentOptions& opts) {
  return opts.mesh ? opts.mesh->min_quality() : std::numeric_limits<double>::quiet_NaN();
}

class TraceWriter {
 public:
  explicit TraceWriter(const DescentOptions& opts) : opts_(opts) {
    if (!opts.csv.empty()) {
      csv_.open(opts.csv);
      if (!csv_) throw Error("cannot write optimization trace " + opts.csv.string());
      csv_ << "iter,J,grad_norm,step,min_quality\n";
    }
    if (!opts.vtk_dir.empty()) std::filesystem::create_directories(opts.vtk_dir);
  }

  void record(const DescentIterate& it) {
    if (csv_.is_open()) {
      char line[160];
      std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g\n", it.iter, it.J, it.grad_norm, it.step,
                    it.min_quality);
      csv_ << line;
      csv_.flush();
    }
    if (!opts_.vtk_dir.empty() && opts_.mesh) {
      char name[32];
      std::snprintf(name, sizeof name, "iter_%04d.vtk", it.iter);
      std::vector<std::pair<std::string, const Function*>> fields;
      if (opts_.vtk_fields) fields = opts_.vtk_fields();
      write_vtk(*opts_.mesh, fields, opts_.vtk_dir / name);
    }
  }

 private:
  const DescentOptions& opts_;
  std::ofstream csv_;
};

}  // namespace

DescentResult optimize_descent(ReducedFunctional& rf, const RieszMap& riesz, const DescentOptions& opts) {
  if (rf.num_controls() == 0) throw TapeError("optimize_descent: no controls");
  if (!(opts.backtrack > 0.0 && opts.backtrack < 1.0)) throw Error("optimize_descent: backtrack must lie in (0, 1)");
  for (const auto& c : rf.controls()) {
    if (c.function()->space()->dim() != riesz.matrix().rows()) {
      throw Error("optimize_descent: Riesz map does not match control '" + c.function()->name() + "'");
    }
  }

  DescentResult res;
  TraceWriter writer(opts);
  ControlValues m = rf.control_values();
  double J = rf(m);
  double q = quality(opts);
  double floor = opts.quality_floor;
  if (opts.mesh && q < floor) {
    floor = 0.5 * q;
    warn("optimize_descent: initial mesh quality " + std::to_string(q) + " is below the floor; using " +
         std::to_string(floor));
  }

  Gradient G = represent(riesz, rf.derivative());
  const double gn0 = G.norm;
  res.trace.push_back({0, J, G.norm, 0.0, q});
  writer.record(res.trace.back());
  double t = G.norm > 0.0 ? opts.initial_norm / G.norm : 0.0;
  res.status = "max_iter";

  for (int it = 1; it <= opts.max_iter; ++it) {
    if (G.norm <= opts.gtol * gn0 || G.norm == 0.0) {
      res.status = "converged";
      break;
    }
    const double slope = -G.norm * G.norm;
    bool accepted = false;
    ControlValues trial;
    double Jt = 0.0;
    while (t >= opts.min_step) {
      trial = axpy(-t, G.r, m);
      try {
        Jt = rf(trial);
      } catch (const DegenerateCellError&) {
        ++res.rejected_quality;
        t *= opts.backtrack;
        continue;
      } catch (const SolverError&) {
        ++res.rejected_quality;
        t *= opts.backtrack;
        continue;
      }
      if (opts.mesh && !(opts.mesh->min_quality() >= floor)) {
        ++res.rejected_quality;
        t *= opts.backtrack;
        continue;
      }
      if (Jt <= J + opts.armijo_c * t * slope) {
        accepted = true;
        break;
      }
      ++res.rejected_armijo;
      t *= opts.backtrack;
    }
    if (!accepted) {
      res.status = "line_search_failed";
      rf(m);
      break;
    }
    m = std::move(trial);
    J = Jt;
    q = quality(opts);
    G = represent(riesz, rf.derivative());
    res.trace.push_back({it, J, G.norm, t, q});
    writer.record(res.trace.back());
    t *= 2.0;
  }
  if (res.status == "max_iter" && G.norm <= opts.gtol * gn0) res.status = "converged";
  res.controls = m;
  return res;
}

}  // namespace shapead
