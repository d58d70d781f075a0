// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.
// Usage: shapead_acceptance [criterion numbers...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "shapead/cases.hpp"
#include "shapead/error.hpp"

using namespace shapead;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string rates_text(const nlohmann::json& t, const char* key) {
  std::string s;
  for (const auto& r : t[key]) s += (s.empty() ? "" : "/") + (r.is_null() ? std::string("nan") : fmt("%.3f", r.get<double>()));
  return s;
}

ControlValues random_directions(const ReducedFunctional& rf, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  ControlValues d = rf.zero_directions();
  for (auto& v : d)
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = N(rng);
  return d;
}

TubeConfig short_tube(TubeVariant v, int steps) {
  TubeConfig c;
  c.variant = v;
  c.T = steps * c.dt;
  return c;
}

// Criteria 1 and 2; the frozen report also carries the timings of criterion 9.
nlohmann::json tube_reports[2];

Outcome tube_taylor(TubeVariant v) {
  TubeConfig c;
  c.variant = v;
  nlohmann::json& rep = tube_reports[static_cast<int>(v)];
  rep = run_tube_case(c, TubeMode::HessianTaylor, {1e-3, 3});
  const auto& t = rep["taylor"];
  std::ostringstream s;
  s << rep["config"]["cells"] << " cells, T=" << c.T << ": rates R0 " << rates_text(t, "rate0") << ", R1 "
    << rates_text(t, "rate1") << ", R2 " << rates_text(t, "rate2");
  return {t["rates_ok"].get<bool>(), s.str()};
}

Outcome cross_mode() {
  double worst = 0.0;
  std::mt19937_64 rng(3);
  for (auto v : {TubeVariant::Frozen, TubeVariant::Decomposed}) {
    TubeModel m = record_tube(TubeConfig{.variant = v});
    const ControlValues g = m.rf->derivative();
    for (int k = 0; k < 5; ++k) {
      const ControlValues d = random_directions(*m.rf, rng);
      const double t = m.rf->tlm(d);
      worst = std::max(worst, std::abs(pairing(g, d) - t) / std::max(1.0, std::abs(t)));
    }
  }
  return {worst <= 1e-10, "max |<g,d> - tlm(d)| / max(1,|tlm|) = " + fmt("%.2e", worst) + " over 10 directions"};
}

Outcome finite_differences() {
  double worst = 0.0;
  const double eps = 1e-4;
  for (auto v : {TubeVariant::Frozen, TubeVariant::Decomposed}) {
    TubeModel m = record_tube(short_tube(v, 5));
    ReducedFunctional& rf = *m.rf;
    const ControlValues x = rf.control_values();
    const ControlValues g = rf.derivative();
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const ControlValues d = tube_smooth_directions(m, seed);
      const double fd = (rf(axpy(eps, d, x)) - rf(axpy(-eps, d, x))) / (2 * eps);
      worst = std::max(worst, std::abs(pairing(g, d) - fd) / std::abs(fd));
    }
    rf(x);
  }
  return {worst <= 1e-5, "max relative error " + fmt("%.2e", worst) + " (step 1e-4, 3 smooth directions, T=5dt, both variants)"};
}

Outcome hessian_symmetry() {
  double worst = 0.0;
  for (auto v : {TubeVariant::Frozen, TubeVariant::Decomposed}) {
    TubeModel m = record_tube(short_tube(v, 10));
    for (std::uint64_t k = 0; k < 3; ++k) {
      const ControlValues a = tube_smooth_directions(m, 10 + 2 * k), b = tube_smooth_directions(m, 11 + 2 * k);
      const double ab = pairing(m.rf->hessian(a), b), ba = pairing(m.rf->hessian(b), a);
      worst = std::max(worst, std::abs(ab - ba) / std::max(std::abs(ab), 1.0));
    }
  }
  return {worst <= 1e-8, "max |<Hv,w> - <Hw,v>| / max(|<Hv,w>|,1) = " + fmt("%.2e", worst) + " (3 pairs, T=10dt, both variants)"};
}

Outcome pironneau_value() {
  const PironneauConfig c;
  PironneauModel m = record_pironneau(c, PironneauPipeline::ThroughDeformation);
  const double J = m.J.value(), ref = 24.3019;
  std::ostringstream s;
  s << "J = " << fmt("%.4f", J) << " on " << m.mesh->num_cells() << " cells (reference 24.3019, "
    << fmt("%+.2f", 100 * (J - ref) / ref) << "%)";
  return {std::abs(J - ref) <= 0.1 * ref, s.str()};
}

Outcome pironneau_optimize() {
  PironneauConfig c;
  c.alpha = 3e5;  // stiff enough to hold the volume within 1%; see README
  const auto rep = run_pironneau_case(c, PironneauPipeline::ThroughDeformation, PironneauMode::Optimize);
  const auto& o = rep["optimize"];
  const double red = o["reduction"], dv = o["volume_drift"], db = o["barycenter_drift"];
  const int iters = o["iterations"];
  const bool positive = o["min_cell_area_positive"];
  std::ostringstream s;
  s << "J " << fmt("%.4f", o["J_initial"].get<double>()) << " -> " << fmt("%.4f", o["J_final"].get<double>()) << " ("
    << fmt("%.2f", 100 * red) << "% in " << iters << " iterations), volume drift " << fmt("%.3f", 100 * dv)
    << "%, barycenter drift " << fmt("%.3f", 100 * db) << "%, min quality " << fmt("%.3f", o["min_quality"].get<double>())
    << ", alpha=" << c.alpha << ", beta=" << c.beta;
  return {red >= 0.1 && iters <= 100 && dv <= 0.01 && db <= 0.01 && positive, s.str()};
}

Outcome properties() {
  std::vector<std::string> failed;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };

  // Translation invariance: no spatial coordinate, constant direction.
  {
    auto m = annulus_mesh(1.0, 0.3, {0.2, 0.1}, 32, 8);
    auto W = coordinate_space(m);
    auto V = FunctionSpace::create(m, {2, 1});
    auto u = make_function(V);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (Eigen::Index i = 0; i < u->dofs().size(); ++i) u->dofs()[i] = U(rng);
    auto c = make_function(W);
    interpolate(as_vector({0.7, -0.4}), *c);
    const Expr q = coefficient(u);
    const Form J = (inner(grad(q), grad(q)) + div(q) * div(q) + dot(q, q)) * dx(m);
    check(std::abs(assemble_scalar(shape_derivative(J, coefficient(c)))) <= 1e-12, "translation invariance (form)");

    // Same through the tape: a Stokes-like energy after a recorded mesh move.
    set_working_tape(std::make_shared<Tape>());
    auto mm = annulus_mesh(1.0, 0.3, {0.2, 0.1}, 32, 8);
    auto th = make_function(coordinate_space(mm));
    move_mesh(mm, th);
    auto Vm = FunctionSpace::create(mm, {1, 0});
    auto w = make_function(Vm);
    const Expr wt = TrialFunction(Vm), wv = TestFunction(Vm);
    solve_linear(inner(grad(wt), grad(wv)) * dx(mm), constant(1.0) * wv * dx(mm), w,
                 {DirichletBC(Vm, constant(0.0), 1), DirichletBC(Vm, constant(1.0), 2)});
    const Scalar E = assemble(inner(grad(coefficient(w)), grad(coefficient(w))) * dx(mm));
    ReducedFunctional rf(E, {Control(th)});
    ControlValues d = rf.zero_directions();
    const int nv = mm->num_vertices();
    d[0].head(nv).setConstant(0.7);
    d[0].tail(nv).setConstant(-0.4);
    check(std::abs(pairing(rf.derivative(), d)) <= 1e-12, "translation invariance (tape)");
  }

  // Dilation: dJ[X] = 2 |Omega| for J = int 1 dx.
  {
    auto m = channel_mesh({0.5, 0.5}, 0.13, 32, 8, 1.5);
    auto dil = make_function(coordinate_space(m));
    interpolate(spatial_coordinate(), *dil);
    const double area = assemble_scalar(constant(1.0) * dx(m));
    check(std::abs(assemble_scalar(shape_derivative(constant(1.0) * dx(m), coefficient(dil))) - 2 * area) <= 1e-13 * area,
          "dilation (form)");

    set_working_tape(std::make_shared<Tape>());
    auto mm = channel_mesh({0.5, 0.5}, 0.13, 32, 8, 1.5);
    auto th = make_function(coordinate_space(mm));
    move_mesh(mm, th);
    const Scalar A = assemble(constant(1.0) * dx(mm));
    ReducedFunctional rf(A, {Control(th)});
    const std::vector<double> coords = mm->coordinates();
    const ControlValues X{Eigen::Map<const Eigen::VectorXd>(coords.data(), 2 * mm->num_vertices())};
    check(std::abs(pairing(rf.derivative(), X) - 2 * area) <= 1e-13 * area, "dilation (tape)");
  }

  // Adjoint form is the exact transpose (mixed Stokes and convection).
  {
    auto m = channel_mesh({0.5, 0.5}, 0.13, 16, 4, 1.5);
    auto W = FunctionSpace::mixed(m, {{2, 1}, {1, 0}});
    const auto tr = TrialFunctions(W), te = TestFunctions(W);
    const Form S = (inner(grad(tr[0]), grad(te[0])) - div(tr[0]) * te[1] - div(te[0]) * tr[1] +
                    dot(as_vector({1.0, 0.5}), dot(grad(tr[0]), te[0]))) *
                   dx(m);
    const SparseMatrix A = assemble_matrix(S);
    const SparseMatrix D = assemble_matrix(adjoint_form(S)) - SparseMatrix(A.transpose());
    double worst = 0.0;
    for (int k = 0; k < D.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(D, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
    check(worst <= 1e-14, "adjoint-form transpose");
  }

  // Single-triangle P1 mass and stiffness.
  {
    auto m = std::make_shared<Mesh>(std::vector<Point>{{0, 0}, {1, 0}, {0, 1}}, std::vector<CellVertices>{{0, 1, 2}});
    auto V = FunctionSpace::create(m, {1, 0});
    const Expr u = TrialFunction(V), v = TestFunction(V);
    Eigen::MatrixXd Mref(3, 3), Kref(3, 3);
    Mref << 2, 1, 1, 1, 2, 1, 1, 1, 2;
    Mref /= 24.0;
    Kref << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
    const Eigen::MatrixXd M = assemble_matrix(u * v * dx(m)), K = assemble_matrix(inner(grad(u), grad(v)) * dx(m));
    check((M - Mref).cwiseAbs().maxCoeff() <= 1e-14, "single-triangle mass");
    check((K - Kref).cwiseAbs().maxCoeff() <= 1e-14, "single-triangle stiffness");
  }

  std::string detail = "translation invariance, dilation, adjoint transpose, single-triangle matrices";
  if (!failed.empty()) {
    detail = "failed:";
    for (const auto& f : failed) detail += " " + f + ";";
  }
  return {failed.empty(), detail};
}

Outcome adjoint_timing() {
  nlohmann::json& rep = tube_reports[0];
  if (rep.is_null()) rep = run_tube_case(TubeConfig{}, TubeMode::Gradient);
  const auto& t = rep["timings"];
  const double ratio = t["ratios"]["adjoint"];
  std::ostringstream s;
  s << "tube frozen: forward " << fmt("%.2f", t["forward_s"].get<double>()) << " s, adjoint "
    << fmt("%.2f", t["adjoint_s"].get<double>()) << " s, ratio " << fmt("%.2f", ratio) << " (bound 2.0)";
  return {ratio <= 2.0, s.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("criteria", only, "criterion numbers to run (default: all)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);
  std::set<int> selected(only.begin(), only.end());

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"tube frozen Taylor rates", [] { return tube_taylor(TubeVariant::Frozen); }},
      {"tube decomposed Taylor rates", [] { return tube_taylor(TubeVariant::Decomposed); }},
      {"adjoint/TLM consistency", cross_mode},
      {"gradient vs central differences", finite_differences},
      {"Hessian symmetry", hessian_symmetry},
      {"Pironneau initial functional", pironneau_value},
      {"Pironneau optimization", pironneau_optimize},
      {"property suite", properties},
      {"adjoint/forward wall time", adjoint_timing},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    all = all && r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << r.detail << " ("
              << fmt("%.1f", secs) << " s)" << std::endl;
  }
  return all ? 0 : 1;
}
