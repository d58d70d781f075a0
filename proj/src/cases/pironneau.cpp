#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "shapead/cases.hpp"
#include "shapead/error.hpp"

namespace shapead {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const std::vector<int> kOuterTags{1, 2, 3};
constexpr int kObstacleTag = 4;

Expr zero_vector() { return as_vector({constant(0.0), constant(0.0)}); }

}  // namespace

void PironneauConfig::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw Error("pironneau: penalty weights must be positive");
  if (!mesh && !(radius > 0.0 && radius < 0.5)) throw Error("pironneau: obstacle radius must lie in (0, 0.5)");
}

ObstacleGeometry obstacle_geometry(const Mesh& mesh) {
  double area = 0.0, mx = 0.0, my = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto& v = mesh.cells()[c];
    const double a = mesh.signed_area(c);
    area += a;
    for (int k = 0; k < 3; ++k) {
      mx += a * mesh.vertices()[v[k]][0] / 3.0;
      my += a * mesh.vertices()[v[k]][1] / 3.0;
    }
  }
  const double vol = 1.0 - area;
  return {vol, {(0.5 - mx) / vol, (0.5 - my) / vol}};
}

PironneauModel record_pironneau(const PironneauConfig& cfg, PironneauPipeline pipeline) {
  cfg.validate();
  PironneauModel model;
  model.config = cfg;
  model.pipeline = pipeline;
  model.tape = std::make_shared<Tape>();
  set_working_tape(model.tape);
  const auto t0 = Clock::now();

  auto mesh = cfg.mesh ? std::make_shared<Mesh>(cfg.mesh->vertices(), cfg.mesh->cells(), cfg.mesh->facet_markers())
                       : channel_mesh(cfg.center, cfg.radius, cfg.n_angular, cfg.n_radial, cfg.grading);
  model.mesh = mesh;
  model.initial = obstacle_geometry(*mesh);
  auto V = coordinate_space(mesh);

  if (pipeline == PironneauPipeline::RieszDescent) {
    model.control = make_function(V, "s");
    model.displacement = model.control;
  } else {
    auto bmesh = extract_boundary(mesh);
    model.control = make_function(FunctionSpace::on_boundary(bmesh), "h");
    const LameField lame = solve_lame_field(mesh, kOuterTags, {kObstacleTag});
    auto h = make_function(V, "h_full");
    transfer_from_boundary(model.control, h);
    model.displacement = elasticity_extend(mesh, h, lame, kOuterTags, kObstacleTag);
  }
  move_mesh(mesh, model.displacement);

  auto W = FunctionSpace::mixed(mesh, {{2, 1}, {1, 0}});
  model.state = make_function(W, "w");
  const auto trial = TrialFunctions(W), test = TestFunctions(W);
  const Expr &u = trial[0], &p = trial[1], &v = test[0], &q = test[1];
  const Expr x = spatial_coordinate();
  const Form a = (inner(grad(u), grad(v)) - div(u) * q - div(v) * p) * dx(mesh);
  const Form L = inner(zero_vector(), v) * dx(mesh);
  const BCs bcs{DirichletBC(W, as_vector({sin(std::numbers::pi * index(x, 1)), constant(0.0)}), 1, 0),
                DirichletBC(W, zero_vector(), 3, 0), DirichletBC(W, zero_vector(), kObstacleTag, 0)};
  solve_linear(a, L, model.state, bcs);

  const Expr uh = split(model.state)[0];
  model.J_flow = assemble(inner(grad(uh), grad(uh)) * dx(mesh));
  const Scalar area = assemble(constant(1.0) * dx(mesh));
  const Scalar vol = 1.0 - area;
  Scalar J = model.J_flow + cfg.alpha * (vol - model.initial.volume) * (vol - model.initial.volume);
  for (int i = 0; i < 2; ++i) {
    const Scalar moment = assemble(index(x, i) * dx(mesh));
    const Scalar dev = (0.5 - moment) / vol - model.initial.barycenter[i];
    J += cfg.beta * dev * dev;
  }
  model.J = J;
  model.rf = std::make_unique<ReducedFunctional>(J, std::vector<Control>{Control(model.control)});
  model.forward_seconds = seconds_since(t0);
  return model;
}

RieszMap pironneau_riesz(const PironneauModel& model) {
  const SpacePtr& space = model.control->space();
  if (model.pipeline == PironneauPipeline::ThroughDeformation) return RieszMap::l2(space, {}, {kObstacleTag});
  switch (model.config.riesz) {
    case RieszKind::L2:
      return RieszMap::l2(space, kOuterTags);
    case RieszKind::H1:
      return RieszMap::h1(space, kOuterTags);
    case RieszKind::Elasticity:
      break;
  }
  const LameField lame = solve_lame_field(model.mesh, kOuterTags, {kObstacleTag});
  return RieszMap::elasticity(space, lame.mu, lame.lambda, kOuterTags);
}

ControlValues pironneau_smooth_directions(const PironneauModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const SpacePtr& space = model.control->space();
  std::vector<Point> pts;
  if (space->is_boundary()) {
    const auto& bm = *space->boundary_mesh();
    for (int p : bm.vertex_map()) pts.push_back(bm.parent()->vertices()[p]);
  } else {
    pts = model.mesh->vertices();
  }
  const int n = static_cast<int>(pts.size());
  Eigen::VectorXd d(2 * n);
  for (int c = 0; c < 2; ++c) {
    const double a = U(rng), b = U(rng), e = U(rng), ph = U(rng);
    for (int i = 0; i < n; ++i) {
      const double x = pts[i][0] - model.config.center[0], y = pts[i][1] - model.config.center[1];
      d[c * n + i] = a + b * x + e * std::sin(4 * std::numbers::pi * y + ph);
    }
  }
  // Dofs the inner product holds at zero carry no direction.
  zero_entries(d, pironneau_riesz(model).constrained());
  const double m = d.cwiseAbs().maxCoeff();
  if (m > 0.0) d /= m;
  return {d};
}

nlohmann::json run_pironneau_case(const PironneauConfig& cfg, PironneauPipeline pipeline, PironneauMode mode,
                                  const TaylorSettings& taylor, const DescentOptions& descent, bool timings) {
  PironneauModel model = record_pironneau(cfg, pipeline);
  ReducedFunctional& rf = *model.rf;
  nlohmann::json rep;
  rep["schema"] = kReportSchema;
  rep["case"] = "pironneau";
  rep["pipeline"] = to_string(pipeline);
  rep["config"] = {{"alpha", cfg.alpha},
                   {"beta", cfg.beta},
                   {"cells", model.mesh->num_cells()},
                   {"vertices", model.mesh->num_vertices()},
                   {"riesz", pipeline == PironneauPipeline::ThroughDeformation ? "boundary-l2" : to_string(cfg.riesz)}};
  rep["J"] = model.J.value();
  rep["J_flow"] = model.J_flow.value();
  rep["volume"] = model.initial.volume;
  rep["barycenter"] = {model.initial.barycenter[0], model.initial.barycenter[1]};
  nlohmann::json t;
  t["forward_s"] = model.forward_seconds;

  if (mode == PironneauMode::Gradient || mode == PironneauMode::Taylor) {
    const auto t0 = Clock::now();
    const ControlValues g = rf.derivative();
    t["adjoint_s"] = seconds_since(t0);
    rep["gradient_norms"] = {g[0].norm()};
  }
  if (mode == PironneauMode::Taylor) {
    const ControlValues d = pironneau_smooth_directions(model, 1);
    const TaylorResult res = taylor_test(rf, rf.control_values(), d, taylor.h0, taylor.halvings, true);
    rep["taylor"] = taylor_report(res, kPironneauRateBands);
    rep["taylor"]["h0"] = taylor.h0;
  }
  if (mode == PironneauMode::Optimize) {
    DescentOptions opts = descent;
    opts.mesh = model.mesh;
    const auto t0 = Clock::now();
    const DescentResult res = optimize_descent(rf, pironneau_riesz(model), opts);
    t["optimize_s"] = seconds_since(t0);
    const ObstacleGeometry g = obstacle_geometry(*model.mesh);
    const double J0 = res.trace.front().J, J1 = res.trace.back().J;
    const double dvol = std::abs(g.volume - model.initial.volume) / model.initial.volume;
    const double dbc = std::hypot(g.barycenter[0] - model.initial.barycenter[0],
                                  g.barycenter[1] - model.initial.barycenter[1]) /
                       std::hypot(model.initial.barycenter[0], model.initial.barycenter[1]);
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& it : res.trace) trace.push_back({it.iter, it.J, it.grad_norm, it.step, it.min_quality});
    rep["optimize"] = {{"status", res.status},
                       {"iterations", static_cast<int>(res.trace.size()) - 1},
                       {"J_initial", J0},
                       {"J_final", J1},
                       {"J_flow_final", model.tape->var(model.J_flow.var()).value[0]},
                       {"reduction", (J0 - J1) / J0},
                       {"volume_final", g.volume},
                       {"barycenter_final", {g.barycenter[0], g.barycenter[1]}},
                       {"volume_drift", dvol},
                       {"barycenter_drift", dbc},
                       {"min_quality", model.mesh->min_quality()},
                       {"min_cell_area_positive", [&] {
                          for (int c = 0; c < model.mesh->num_cells(); ++c)
                            if (model.mesh->signed_area(c) <= 0.0) return false;
                          return true;
                        }()},
                       {"rejected_quality", res.rejected_quality},
                       {"rejected_armijo", res.rejected_armijo},
                       {"trace_columns", {"iter", "J", "grad_norm", "step", "min_quality"}},
                       {"trace", trace}};
  }
  if (t.contains("adjoint_s")) t["ratios"]["adjoint"] = t["adjoint_s"].get<double>() / model.forward_seconds;
  if (timings) rep["timings"] = t;
  return rep;
}

}  // namespace shapead
