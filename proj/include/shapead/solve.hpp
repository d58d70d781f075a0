#pragma once

#include <Eigen/SparseLU>
#include <memory>
#include <vector>

#include "shapead/assemble.hpp"

namespace shapead {

/// Strong Dirichlet condition on the dofs of component `sub` attached to facets tagged
/// `tag`. The value is a constant or a function of the spatial coordinate only.
struct DirichletBC {
  DirichletBC(SpacePtr space, Expr value, int tag, int sub = 0);

  SpacePtr space;
  Expr value;
  int tag;
  int sub;

  bool depends_on_x() const { return x_dependent_; }
  /// Constrained global dofs (sorted) and their values at the current coordinates.
  std::vector<int> dofs() const;
  std::vector<double> values() const;
  /// Mesh vertices whose position influences the constrained dof locations.
  std::vector<int> vertices() const;

 private:
  bool x_dependent_ = false;
};

using BCs = std::vector<DirichletBC>;

enum class BCMode { Forward, Homogenized };

/// Sorted union of constrained dofs.
std::vector<int> bc_dofs(const BCs& bcs);
/// Replace constrained rows by identity rows; the rhs receives the bc values (forward) or
/// zeros (homogenized).
void apply_dirichlet(SparseMatrix& A, Eigen::VectorXd& b, const BCs& bcs, BCMode mode);
/// Identity rows only.
void apply_dirichlet_rows(SparseMatrix& A, const std::vector<int>& rows);
void zero_entries(Eigen::VectorXd& v, const std::vector<int>& dofs);
/// Write bc values into the constrained dofs of `u`.
void set_bc_values(Eigen::VectorXd& u, const BCs& bcs);

/// Sparse LU factorization with partial pivoting; solves with A and with its transpose.
class LUSolver {
 public:
  explicit LUSolver(const SparseMatrix& A);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::VectorXd solve_transpose(const Eigen::VectorXd& b) const;
  const SparseMatrix& matrix() const { return A_; }

 private:
  SparseMatrix A_;
  mutable Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

/// Solve a(u, v) = L(v) with strong bcs into `u`. Returns the factorization of the
/// constrained matrix. Throws SolverError for singular systems or a residual above
/// 1e-10 relative.
std::shared_ptr<LUSolver> solve_linear_system(const Form& a, const Form& L, const BCs& bcs, Function& u);

struct NewtonOptions {
  double tol = 1e-10;  // absolute l2 norm of the residual on unconstrained dofs
  int max_iter = 25;
};

struct NewtonResult {
  int iterations = 0;
  std::vector<double> residuals;
};

/// Newton's method for F(u; v) = 0, with the Jacobian dF/du assembled fresh each iteration.
/// Throws ConvergenceError (carrying the residual history) after max_iter iterations.
NewtonResult newton_solve(const Form& F, const BCs& bcs, const FunctionPtr& u, const NewtonOptions& opts = {});

/// Add a vector CG1 displacement to the mesh coordinates (no tape).
void displace_mesh(Mesh& mesh, const Function& theta);

/// Copy boundary values of `h` (vector CG1 on a BoundaryMesh) onto the boundary vertices
/// of a vector CG1 function on the parent mesh; interior values are zero (no tape).
void scatter_boundary(const Function& h, Function& out);
/// Transpose of scatter_boundary: gather parent values at boundary vertices.
Eigen::VectorXd gather_boundary(const FunctionSpace& boundary_space, const Eigen::VectorXd& parent_values);

/// Legacy ASCII VTK unstructured grid. CG2 fields are written at vertices only (edge
/// dofs dropped); vectors are padded with a zero z component.
void write_vtk(const Mesh& mesh, const std::vector<std::pair<std::string, const Function*>>& fields,
               const std::filesystem::path& path);

}  // namespace shapead
