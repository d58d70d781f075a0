// shapead command line: taylor | run | optimize | mesh-info

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "shapead/cases.hpp"
#include "shapead/error.hpp"

using namespace shapead;

namespace {

struct Options {
  std::string case_name = "tube";
  std::string variant = "frozen";
  std::string pipeline = "through-deformation";
  std::string mode = "value";
  std::string riesz = "h1";
  std::string mesh_path;
  std::string out;
  std::string out_dir;
  std::string csv;
  bool no_timings = false;
  int order = 2;
  double h0 = -1.0;
  int halvings = 3;
  int max_iters = 100;
  double initial_norm = 0.05;
  double quality_floor = 0.1;
  TubeConfig tube;
  PironneauConfig piro;
};

void add_case_flags(CLI::App* cmd, Options& o, bool with_mode) {
  cmd->add_option("--case", o.case_name, "tube or pironneau")->check(CLI::IsMember({"tube", "pironneau"}));
  cmd->add_option("--variant", o.variant, "tube variant")->check(CLI::IsMember({"frozen", "decomposed"}));
  cmd->add_option("--pipeline", o.pipeline, "pironneau pipeline")
      ->check(CLI::IsMember({"riesz-descent", "through-deformation"}));
  if (with_mode) cmd->add_option("--mode", o.mode, "value or gradient")->check(CLI::IsMember({"value", "gradient"}));
  cmd->add_option("--mesh", o.mesh_path, "Gmsh 2.2 mesh replacing the generated one");
  cmd->add_option("--T", o.tube.T, "tube end time")->check(CLI::PositiveNumber);
  cmd->add_option("--dt", o.tube.dt, "tube time step")->check(CLI::PositiveNumber);
  cmd->add_option("--k", o.tube.k, "tube diffusion coefficient")->check(CLI::NonNegativeNumber);
  cmd->add_option("--omega", o.tube.omega, "tube rotation rate");
  cmd->add_option("--alpha", o.piro.alpha, "volume penalty")->check(CLI::PositiveNumber);
  cmd->add_option("--beta", o.piro.beta, "barycenter penalty")->check(CLI::PositiveNumber);
  cmd->add_option("--riesz", o.riesz, "riesz-descent inner product")->check(CLI::IsMember({"l2", "h1", "elasticity"}));
  cmd->add_option("--n-angular", o.tube.n_angular, "angular resolution")->check(CLI::PositiveNumber);
  cmd->add_option("--n-radial", o.tube.n_radial, "radial resolution")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "write the JSON report here (default: stdout)");
  cmd->add_option("--out-dir", o.out_dir, "directory for VTK snapshots");
  cmd->add_flag("--no-timings", o.no_timings, "omit wall-clock timings from the report");
}

void finish_config(Options& o, const CLI::App* cmd) {
  if (!o.mesh_path.empty()) {
    auto m = load_mesh(o.mesh_path);
    o.tube.mesh = m;
    o.piro.mesh = m;
  }
  if (o.case_name == "pironneau") {
    // Resolution flags share names across cases; only override when given.
    if (cmd->count("--n-angular")) o.piro.n_angular = o.tube.n_angular;
    if (cmd->count("--n-radial")) o.piro.n_radial = o.tube.n_radial;
  }
  o.tube.variant = parse_tube_variant(o.variant);
  o.piro.riesz = parse_riesz_kind(o.riesz);
  if (!o.out_dir.empty()) o.tube.vtk_dir = o.out_dir;
}

void emit(const nlohmann::json& rep, const Options& o) {
  const std::string text = rep.dump(2) + "\n";
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(o.out);
  if (!f) throw Error("cannot write " + o.out);
  f << text;
}

int cmd_taylor(Options& o, const CLI::App* cmd) {
  finish_config(o, cmd);
  nlohmann::json rep;
  if (o.case_name == "tube") {
    const TaylorSettings ts{o.h0 > 0 ? o.h0 : 1e-3, o.halvings};
    rep = run_tube_case(o.tube, o.order == 2 ? TubeMode::HessianTaylor : TubeMode::Taylor, ts, !o.no_timings);
  } else {
    // Riesz-descent moves vertices directly, so it needs a much smaller step.
    const double h0 = o.pipeline == "riesz-descent" ? 0.05 : 1.0;
    const TaylorSettings ts{o.h0 > 0 ? o.h0 : h0, o.halvings};
    rep = run_pironneau_case(o.piro, parse_pironneau_pipeline(o.pipeline), PironneauMode::Taylor, ts, {},
                             !o.no_timings);
  }
  emit(rep, o);
  const bool ok = rep["taylor"]["rates_ok"].get<bool>();
  if (!o.out.empty() || !ok) {
    const auto& t = rep["taylor"];
    std::cerr << "taylor " << o.case_name << ": rates " << (ok ? "within" : "OUTSIDE") << " tolerance";
    if (!ok) std::cerr << "; failing rows " << t["failing_rows"].dump();
    std::cerr << "\n";
  }
  return ok ? 0 : 1;
}

int cmd_run(Options& o, const CLI::App* cmd) {
  finish_config(o, cmd);
  nlohmann::json rep;
  if (o.case_name == "tube") {
    rep = run_tube_case(o.tube, o.mode == "value" ? TubeMode::Value : TubeMode::Gradient, {}, !o.no_timings);
  } else {
    rep = run_pironneau_case(o.piro, parse_pironneau_pipeline(o.pipeline),
                             o.mode == "value" ? PironneauMode::Value : PironneauMode::Gradient, {}, {},
                             !o.no_timings);
  }
  emit(rep, o);
  return 0;
}

int cmd_optimize(Options& o, const CLI::App* cmd) {
  finish_config(o, cmd);
  if (o.case_name != "pironneau") throw CLI::ValidationError("--case", "optimize supports only the pironneau case");
  DescentOptions d;
  d.max_iter = o.max_iters;
  d.initial_norm = o.initial_norm;
  d.quality_floor = o.quality_floor;
  if (!o.csv.empty()) d.csv = o.csv;
  if (!o.out_dir.empty()) d.vtk_dir = o.out_dir;
  nlohmann::json rep = run_pironneau_case(o.piro, parse_pironneau_pipeline(o.pipeline), PironneauMode::Optimize,
                                          {}, d, !o.no_timings);
  emit(rep, o);
  const auto& r = rep["optimize"];
  std::cerr << "optimize: J " << r["J_initial"].get<double>() << " -> " << r["J_final"].get<double>() << " ("
            << 100 * r["reduction"].get<double>() << "% in " << r["iterations"].get<int>() << " iterations, "
            << r["status"].get<std::string>() << ")\n";
  return 0;
}

int cmd_mesh_info(const std::string& path, const std::string& out) {
  std::shared_ptr<Mesh> m;
  if (path == "builtin:annulus") {
    TubeConfig c;
    m = annulus_mesh(c.outer_radius, c.hole_radius, c.hole_center, c.n_angular, c.n_radial);
  } else if (path == "builtin:channel") {
    PironneauConfig c;
    m = channel_mesh(c.center, c.radius, c.n_angular, c.n_radial, c.grading);
  } else {
    m = load_mesh(path);
  }
  Options o;
  o.out = out;
  emit(mesh_report(*m), o);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shape derivatives of moving-domain PDE models"};
  app.require_subcommand(1);
  Options o;

  auto* taylor = app.add_subcommand("taylor", "Taylor remainder test of a case");
  add_case_flags(taylor, o, false);
  taylor->add_option("--h0", o.h0, "initial step")->check(CLI::PositiveNumber);
  taylor->add_option("--halvings", o.halvings, "number of step halvings")->check(CLI::Range(1, 30));
  taylor->add_option("--order", o.order, "1: gradient only, 2: include the Hessian")->check(CLI::Range(1, 2));

  auto* run = app.add_subcommand("run", "Evaluate a case");
  add_case_flags(run, o, true);

  auto* optimize = app.add_subcommand("optimize", "Shape optimization of the pironneau case");
  add_case_flags(optimize, o, false);
  optimize->add_option("--max-iters", o.max_iters, "descent iterations")->check(CLI::PositiveNumber);
  optimize->add_option("--initial-norm", o.initial_norm, "norm of the first trial step")->check(CLI::PositiveNumber);
  optimize->add_option("--quality-floor", o.quality_floor, "smallest admissible cell quality");
  optimize->add_option("--csv", o.csv, "optimization trace");

  std::string mesh_path, mesh_out;
  auto* info = app.add_subcommand("mesh-info", "Mesh statistics (path, builtin:annulus or builtin:channel)");
  info->add_option("path", mesh_path)->required();
  info->add_option("--out", mesh_out, "write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*taylor) return cmd_taylor(o, taylor);
    if (*run) return cmd_run(o, run);
    if (*optimize) return cmd_optimize(o, optimize);
    if (*info) return cmd_mesh_info(mesh_path, mesh_out);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
