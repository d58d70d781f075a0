#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "shapead/reduced.hpp"

namespace shapead {

enum class RieszKind { L2, H1, Elasticity };

/// Inner product M on a control space, with dofs on `zero_tags` held at zero. Maps a
/// co-vector g to the primal r with M r = g.
class RieszMap {
 public:
  /// Mass matrix. On a boundary space: the facet mass over facets with `support_tags`
  /// (all marked facets when empty); dofs off the support are held at zero.
  static RieszMap l2(SpacePtr space, std::vector<int> zero_tags = {}, std::vector<int> support_tags = {});
  /// Mass plus stiffness.
  static RieszMap h1(SpacePtr space, std::vector<int> zero_tags = {});
  /// 2 mu eps(r):eps(t) plus lambda div r div t (vector CG1 only).
  static RieszMap elasticity(SpacePtr space, FunctionPtr mu, double lambda, std::vector<int> zero_tags);

  RieszKind kind() const { return kind_; }
  const SpacePtr& space() const { return space_; }
  /// Operator before constraints.
  const SparseMatrix& matrix() const { return M_; }
  const std::vector<int>& constrained() const { return fixed_; }

  Eigen::VectorXd representation(const Eigen::VectorXd& g) const;
  /// sqrt(g . M^-1 g) over the unconstrained dofs.
  double dual_norm(const Eigen::VectorXd& g) const;
  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const { return a.dot(M_ * b); }

 private:
  RieszMap(SpacePtr space, RieszKind kind, SparseMatrix M, std::vector<int> fixed);

  SpacePtr space_;
  RieszKind kind_;
  SparseMatrix M_;
  std::vector<int> fixed_;
  std::shared_ptr<LUSolver> lu_;
};

FunctionPtr riesz_representation(const RieszMap& map, const Eigen::VectorXd& g);

/// Lame parameters of the mesh-deformation operator: mu harmonic between the outer and
/// obstacle boundaries, lambda constant.
struct LameField {
  FunctionPtr mu;
  double lambda = 0.0;
};

LameField solve_lame_field(const std::shared_ptr<Mesh>& mesh, const std::vector<int>& outer_tags,
                           const std::vector<int>& obstacle_tags, double outer_value = 1.0,
                           double obstacle_value = 500.0);

/// Displacement s with int sigma(s):eps(t) dx = int h.t ds(traction_tag), s = 0 on
/// `zero_tags`; recorded on the working tape.
FunctionPtr elasticity_extend(const std::shared_ptr<Mesh>& mesh, const FunctionPtr& h, const LameField& lame,
                              const std::vector<int>& zero_tags, int traction_tag);

struct DescentOptions {
  int max_iter = 100;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  /// First trial step has M-norm `initial_norm` (the gradient-norm normalization).
  double initial_norm = 0.05;
  double min_step = 1e-12;
  double quality_floor = 0.1;
  double gtol = 1e-10;  // stop when the gradient dual norm falls below gtol * initial norm
  std::shared_ptr<Mesh> mesh;  // mesh whose quality is guarded; optional
  std::filesystem::path csv;
  std::filesystem::path vtk_dir;
  std::function<std::vector<std::pair<std::string, const Function*>>()> vtk_fields;
};

struct DescentIterate {
  int iter;
  double J;
  double grad_norm;
  double step;  // accepted step (0 for the initial point)
  double min_quality;
};

struct DescentResult {
  std::vector<DescentIterate> trace;
  ControlValues controls;
  std::string status;  // converged | max_iter | line_search_failed
  int rejected_quality = 0;
  int rejected_armijo = 0;
};

/// Steepest descent in the inner product of `riesz` with Armijo backtracking and a mesh
/// quality guard. Leaves rf evaluated at the final iterate.
DescentResult optimize_descent(ReducedFunctional& rf, const RieszMap& riesz, const DescentOptions& opts = {});

}  // namespace shapead
