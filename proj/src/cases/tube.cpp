#include <algorithm>
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

Expr rot(const Expr& y, double omega) {
  const double c = 2 * std::numbers::pi * omega;
  return as_vector({c * index(y, 1), -c * index(y, 0)});
}

std::vector<double> gradient_norms(const ControlValues& g) {
  std::vector<double> out;
  for (const auto& v : g) out.push_back(v.norm());
  return out;
}

}  // namespace

int TubeConfig::steps() const { return static_cast<int>(std::lround(T / dt)); }

void TubeConfig::validate() const {
  if (!(dt > 0.0)) throw Error("tube: dt must be positive");
  if (!(T >= dt * (1 - 1e-12))) throw Error("tube: T must be at least dt");
  if (k < 0.0) throw Error("tube: k must be nonnegative");
  if (!mesh && (n_angular < 3 || n_radial < 1)) throw Error("tube: mesh resolution too small");
}

TubeModel record_tube(const TubeConfig& cfg) {
  cfg.validate();
  TubeModel model;
  model.config = cfg;
  model.tape = std::make_shared<Tape>();
  set_working_tape(model.tape);
  const auto t0 = Clock::now();

  auto mesh = cfg.mesh ? std::make_shared<Mesh>(cfg.mesh->vertices(), cfg.mesh->cells(), cfg.mesh->facet_markers())
                       : annulus_mesh(cfg.outer_radius, cfg.hole_radius, cfg.hole_center, cfg.n_angular, cfg.n_radial);
  model.mesh = mesh;
  model.reference = mesh->coordinates();
  const int N = cfg.steps();
  const double dt = cfg.dt;

  auto V = coordinate_space(mesh);
  auto W = FunctionSpace::create(mesh, {1, 0});
  const Expr z = TestFunction(V);
  const Expr X = spatial_coordinate();
  auto F_s = [&](const FunctionPtr& thn) {
    const Expr th = coefficient(thn);
    return inner(th, z) * dx(mesh) - (dt * 0.5) * inner(rot(X + th, cfg.omega) + rot(X, cfg.omega), z) * dx(mesh);
  };

  auto u0 = make_function(W, "u0");
  auto u1 = make_function(W, "u1");
  model.u = u1;
  const Expr v = TestFunction(W), w = TrialFunction(W);
  auto F_u = [&](const Expr& vel) {
    const Expr U0 = coefficient(u0);
    return (1.0 / dt) * ((w - U0) * v) * dx(mesh) +
           cfg.k * inner(grad(v), 0.5 * (grad(w) + grad(U0))) * dx(mesh) +
           inner(0.5 * (w + U0) * vel, grad(v)) * dx(mesh);
  };
  const BCs bcs{DirichletBC(W, constant(1.0), 2)};

  for (int i = 0; i <= N; ++i) model.thetas.push_back(make_function(V, "theta_" + std::to_string(i)));
  auto& thetas = model.thetas;
  std::vector<FunctionPtr> S_tot;
  auto S = make_function(V, "S");
  if (cfg.variant == TubeVariant::Decomposed) {
    for (int i = 0; i <= N; ++i) S_tot.push_back(make_function(V, "S_tot_" + std::to_string(i)));
    assign(S_tot[0], thetas[0]);
  }

  auto snapshot = [&](int i) {
    if (cfg.vtk_dir.empty()) return;
    std::filesystem::create_directories(cfg.vtk_dir);
    char name[32];
    std::snprintf(name, sizeof name, "tube_%04d.vtk", i);
    write_vtk(*mesh, {{"u", u1.get()}}, cfg.vtk_dir / name);
  };

  Scalar J = 0.0;
  try {
    move_mesh(mesh, thetas[0]);
    snapshot(0);
    for (int i = 0; i < N; ++i) {
      Expr vel;
      if (cfg.variant == TubeVariant::Frozen) {
        {
          StopAnnotating stop;
          solve_newton(F_s(thetas[i + 1]), thetas[i + 1]);
        }
        move_mesh(mesh, thetas[i + 1]);
        vel = (0.5 / dt) * (coefficient(thetas[i + 1]) + coefficient(thetas[i]));
      } else {
        solve_newton(F_s(S), S);
        assign(S_tot[i + 1], {{1.0, S}, {1.0, thetas[i + 1]}});
        move_mesh(mesh, S_tot[i + 1]);
        vel = (0.5 / dt) * (coefficient(S_tot[i]) + coefficient(S_tot[i + 1]));
      }
      const Form F = F_u(vel);
      solve_linear(lhs(F), rhs(F), u1, bcs);
      assign(u0, u1);
      J += assemble(dt * inner(grad(coefficient(u1)), grad(coefficient(u1))) * dx(mesh));
      snapshot(i + 1);
    }
  } catch (const DegenerateCellError& e) {
    throw MeshError(std::string("tube: the mesh tangled while rotating (") + e.what() + "); use a smaller dt");
  }
  model.J = J;
  std::vector<Control> controls;
  for (const auto& th : thetas) controls.emplace_back(th);
  model.rf = std::make_unique<ReducedFunctional>(J, std::move(controls));
  model.forward_seconds = seconds_since(t0);
  return model;
}

ControlValues tube_test_directions(const TubeModel& model) {
  const int nv = model.mesh->num_vertices();
  Eigen::VectorXd d(2 * nv);
  for (int i = 0; i < nv; ++i) {
    const double x = model.reference[i], y = model.reference[nv + i];
    d[i] = d[nv + i] = 1.0 - x * x - y * y;
  }
  return ControlValues(model.thetas.size(), d);
}

ControlValues tube_smooth_directions(const TubeModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const int nv = model.mesh->num_vertices();
  ControlValues out;
  for (std::size_t k = 0; k < model.thetas.size(); ++k) {
    Eigen::VectorXd d(2 * nv);
    for (int c = 0; c < 2; ++c) {
      const double a = U(rng), b = U(rng), e = U(rng), f = U(rng);
      for (int i = 0; i < nv; ++i) {
        const double x = model.reference[i], y = model.reference[nv + i];
        d[c * nv + i] = a * (1.0 - x * x - y * y) + b * x * y + e * std::sin(std::numbers::pi * x) + f * std::cos(2 * y);
      }
    }
    out.push_back(std::move(d));
  }
  double m = 0.0;
  for (const auto& d : out) m = std::max(m, d.cwiseAbs().maxCoeff());
  if (m > 0.0)
    for (auto& d : out) d /= m;
  return out;
}

nlohmann::json run_tube_case(const TubeConfig& cfg, TubeMode mode, const TaylorSettings& taylor, bool timings) {
  TubeModel model = record_tube(cfg);
  ReducedFunctional& rf = *model.rf;
  nlohmann::json rep;
  rep["schema"] = kReportSchema;
  rep["case"] = "tube";
  rep["variant"] = to_string(cfg.variant);
  rep["config"] = {{"k", cfg.k},
                   {"omega", cfg.omega},
                   {"T", cfg.T},
                   {"dt", cfg.dt},
                   {"steps", cfg.steps()},
                   {"cells", model.mesh->num_cells()},
                   {"vertices", model.mesh->num_vertices()}};
  rep["J"] = model.J.value();
  nlohmann::json t;
  t["forward_s"] = model.forward_seconds;

  if (mode != TubeMode::Value) {
    const auto t0 = Clock::now();
    const ControlValues g = rf.derivative();
    t["adjoint_s"] = seconds_since(t0);
    rep["gradient_norms"] = gradient_norms(g);
  }
  if (mode == TubeMode::Taylor || mode == TubeMode::HessianTaylor) {
    const ControlValues d = tube_test_directions(model);
    const bool second = mode == TubeMode::HessianTaylor;
    if (second) {
      const auto t0 = Clock::now();
      rf.hessian(d);
      t["hessian_s"] = seconds_since(t0);
    }
    const TaylorResult res = taylor_test(rf, rf.control_values(), d, taylor.h0, taylor.halvings, second);
    rep["taylor"] = taylor_report(res);
    rep["taylor"]["h0"] = taylor.h0;
  }
  if (t.contains("adjoint_s")) t["ratios"]["adjoint"] = t["adjoint_s"].get<double>() / model.forward_seconds;
  if (t.contains("hessian_s")) t["ratios"]["hessian"] = t["hessian_s"].get<double>() / model.forward_seconds;
  if (timings) rep["timings"] = t;
  return rep;
}

}  // namespace shapead
