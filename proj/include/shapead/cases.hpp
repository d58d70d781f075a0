#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "shapead/deform.hpp"

namespace shapead {

// ---- Rotating-hole tube ----------------------------------------------------------

enum class TubeVariant { Frozen, Decomposed };
enum class TubeMode { Value, Gradient, Taylor, HessianTaylor };

struct TubeConfig {
  double k = 0.01;
  double omega = 0.25;
  double T = 0.5;
  double dt = 0.01;
  TubeVariant variant = TubeVariant::Frozen;
  double outer_radius = 1.0;
  double hole_radius = 0.2;
  Point hole_center{0.5, 0.0};
  int n_angular = 64;
  int n_radial = 16;
  std::shared_ptr<Mesh> mesh;  // replaces the generated annulus (outer tag 1, hole tag 2)
  std::filesystem::path vtk_dir;

  int steps() const;
  void validate() const;
};

/// Recorded tube forward run. Controls are the per-step displacements theta_0..theta_N.
struct TubeModel {
  TubeConfig config;
  std::shared_ptr<Tape> tape;
  std::shared_ptr<Mesh> mesh;
  std::vector<double> reference;  // blocked initial coordinates
  std::vector<FunctionPtr> thetas;
  FunctionPtr u;
  Scalar J;
  std::unique_ptr<ReducedFunctional> rf;
  double forward_seconds = 0.0;
};

/// Runs the forward model on a fresh working tape.
TubeModel record_tube(const TubeConfig& cfg);
/// delta theta_i = (1 - x^2 - y^2, 1 - x^2 - y^2) at the initial coordinates, every step.
ControlValues tube_test_directions(const TubeModel& model);
/// Random combinations of smooth fields (deterministic in `seed`), per step and component,
/// scaled to unit max norm over all steps.
ControlValues tube_smooth_directions(const TubeModel& model, std::uint64_t seed);

struct TaylorSettings {
  double h0 = 1e-3;
  int halvings = 3;
};

nlohmann::json run_tube_case(const TubeConfig& cfg, TubeMode mode, const TaylorSettings& taylor = {},
                             bool timings = true);

// ---- Pironneau Stokes benchmark ---------------------------------------------------

enum class PironneauPipeline { RieszDescent, ThroughDeformation };
enum class PironneauMode { Value, Gradient, Taylor, Optimize };

struct PironneauConfig {
  double alpha = 1e4;
  double beta = 1e4;
  Point center{0.5, 0.5};
  double radius = 0.13;
  int n_angular = 64;
  int n_radial = 14;
  double grading = 1.5;
  std::shared_ptr<Mesh> mesh;  // replaces the generated channel (tags 1..4)
  RieszKind riesz = RieszKind::H1;  // inner product of the riesz-descent pipeline

  void validate() const;
};

/// Obstacle volume 1 - |Omega| and barycenter (0.5 - int x_i dx) / volume.
struct ObstacleGeometry {
  double volume;
  Point barycenter;
};
ObstacleGeometry obstacle_geometry(const Mesh& mesh);

struct PironneauModel {
  PironneauConfig config;
  PironneauPipeline pipeline;
  std::shared_ptr<Tape> tape;
  std::shared_ptr<Mesh> mesh;
  FunctionPtr control;  // s (volumetric) or h (on the boundary mesh)
  FunctionPtr state;    // mixed (u, p)
  FunctionPtr displacement;
  ObstacleGeometry initial;
  Scalar J, J_flow;
  std::unique_ptr<ReducedFunctional> rf;
  double forward_seconds = 0.0;
};

PironneauModel record_pironneau(const PironneauConfig& cfg, PironneauPipeline pipeline);
/// Inner product used for descent: boundary l2 on the obstacle for the through-deformation
/// pipeline, config.riesz (zero on tags 1-3) for riesz-descent.
RieszMap pironneau_riesz(const PironneauModel& model);
/// Random smooth control directions with unit max norm.
ControlValues pironneau_smooth_directions(const PironneauModel& model, std::uint64_t seed);

nlohmann::json run_pironneau_case(const PironneauConfig& cfg, PironneauPipeline pipeline, PironneauMode mode,
                                  const TaylorSettings& taylor = {1.0, 3}, const DescentOptions& descent = {},
                                  bool timings = true);

// ---- Reports ------------------------------------------------------------------------

inline constexpr int kReportSchema = 1;

struct RateBand {
  double lo, hi;
};
using RateBands = std::array<RateBand, 3>;
/// Tube bands: (0.85, 1.15), (1.85, 2.15), (2.75, 3.25).
extern const RateBands kRateBands;
/// Pironneau bands: rate0 >= 0.9 (the quadratic term may dominate R0), (1.9, 2.1), (2.8, 3.2).
extern const RateBands kPironneauRateBands;

/// {table, rates_ok, failing_rows}; rows with a rate outside its band are listed.
nlohmann::json taylor_report(const TaylorResult& t, const RateBands& bands = kRateBands);
bool taylor_rates_ok(const TaylorResult& t, const RateBands& bands = kRateBands);

std::string to_string(TubeVariant v);
std::string to_string(PironneauPipeline p);
TubeVariant parse_tube_variant(const std::string& s);
PironneauPipeline parse_pironneau_pipeline(const std::string& s);
RieszKind parse_riesz_kind(const std::string& s);
std::string to_string(RieszKind k);

nlohmann::json mesh_report(const Mesh& mesh);

}  // namespace shapead
