#include "shapead/solve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "shapead/error.hpp"

namespace shapead {

DirichletBC::DirichletBC(SpacePtr space_, Expr value_, int tag_, int sub_)
    : space(std::move(space_)), value(std::move(value_)), tag(tag_), sub(sub_) {
  if (!space) throw FormError("DirichletBC needs a space");
  if (space->is_boundary()) throw FormError("DirichletBC on a boundary space");
  if (sub < 0 || sub >= space->num_sub()) throw FormError("DirichletBC sub-space index out of range");
  if (!value.valid()) throw FormError("DirichletBC needs a value");
  if (value.rank() != space->element(sub).rank) throw FormError("DirichletBC value shape does not match the space");
  if (!coefficients(value).empty() || !argument_numbers(value).empty()) {
    throw FormError("DirichletBC value must be a constant or a function of the spatial coordinate");
  }
  x_dependent_ = depends_on_spatial_coordinate(value);
  space->boundary_dofs(sub, tag);  // throws when the tag has no facets
}

std::vector<int> DirichletBC::dofs() const {
  std::vector<int> out;
  for (const auto& d : space->boundary_dofs(sub, tag)) out.push_back(d.dof);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> DirichletBC::values() const {
  auto locs = space->boundary_dofs(sub, tag);
  std::sort(locs.begin(), locs.end(), [](const auto& a, const auto& b) { return a.dof < b.dof; });
  std::vector<double> out;
  std::vector<double> constant;
  if (!x_dependent_) constant = evaluate_at(value, {0.0, 0.0});
  for (const auto& l : locs) out.push_back(x_dependent_ ? evaluate_at(value, l.x)[l.component] : constant[l.component]);
  return out;
}

std::vector<int> DirichletBC::vertices() const {
  const int tags[] = {tag};
  return space->mesh()->vertices_with_tags(tags);
}

std::vector<int> bc_dofs(const BCs& bcs) {
  std::set<int> all;
  for (const auto& bc : bcs)
    for (int d : bc.dofs()) all.insert(d);
  return {all.begin(), all.end()};
}

void apply_dirichlet_rows(SparseMatrix& A, const std::vector<int>& rows) {
  if (rows.empty()) return;
  std::vector<char> is_bc(A.rows(), 0);
  for (int r : rows) is_bc[r] = 1;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(A.nonZeros() + rows.size());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      if (!is_bc[it.row()]) t.emplace_back(it.row(), it.col(), it.value());
  for (int r : rows) t.emplace_back(r, r, 1.0);
  SparseMatrix B(A.rows(), A.cols());
  B.setFromTriplets(t.begin(), t.end());
  A = std::move(B);
}

void zero_entries(Eigen::VectorXd& v, const std::vector<int>& dofs) {
  for (int d : dofs) v[d] = 0.0;
}

void set_bc_values(Eigen::VectorXd& u, const BCs& bcs) {
  for (const auto& bc : bcs) {
    const auto d = bc.dofs();
    const auto v = bc.values();
    for (std::size_t k = 0; k < d.size(); ++k) u[d[k]] = v[k];
  }
}

void apply_dirichlet(SparseMatrix& A, Eigen::VectorXd& b, const BCs& bcs, BCMode mode) {
  apply_dirichlet_rows(A, bc_dofs(bcs));
  if (mode == BCMode::Forward) {
    set_bc_values(b, bcs);
  } else {
    zero_entries(b, bc_dofs(bcs));
  }
}

LUSolver::LUSolver(const SparseMatrix& A) : A_(A) {
  A_.makeCompressed();
  lu_.compute(A_);
  if (lu_.info() != Eigen::Success) throw SolverError("singular matrix: sparse LU factorization failed");
}

Eigen::VectorXd LUSolver::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd x = lu_.solve(b);
  if (lu_.info() != Eigen::Success || !x.allFinite()) throw SolverError("sparse LU solve failed");
  return x;
}

Eigen::VectorXd LUSolver::solve_transpose(const Eigen::VectorXd& b) const {
  Eigen::VectorXd x = lu_.transpose().solve(b);
  if (!x.allFinite()) throw SolverError("sparse LU transpose solve failed");
  return x;
}

std::shared_ptr<LUSolver> solve_linear_system(const Form& a, const Form& L, const BCs& bcs, Function& u) {
  if (a.arity() != 2) throw SolverError("solve: left-hand side must be bilinear");
  const SpacePtr test = a.argument_space(0);
  const SpacePtr trial = a.argument_space(1);
  if (test->dim() != trial->dim()) throw SolverError("solve: system is not square");
  if (u.space()->dim() != trial->dim()) throw SolverError("solve: unknown does not live on the trial space");
  SparseMatrix A = assemble_matrix(a);
  Eigen::VectorXd b = L.empty() ? Eigen::VectorXd::Zero(test->dim()) : assemble_vector(L, test);
  apply_dirichlet(A, b, bcs, BCMode::Forward);
  auto lu = std::make_shared<LUSolver>(A);
  Eigen::VectorXd x = lu->solve(b);
  const double res = (lu->matrix() * x - b).norm();
  if (res > 1e-10 * b.norm() && res > 1e-300) {
    throw SolverError("solve: residual " + std::to_string(res) + " exceeds 1e-10 relative (singular system?)");
  }
  u.dofs() = x;
  return lu;
}

NewtonResult newton_solve(const Form& F, const BCs& bcs, const FunctionPtr& u, const NewtonOptions& opts) {
  if (F.arity() != 1) throw SolverError("newton: residual form must be linear in the test function");
  const SpacePtr space = F.argument_space(0);
  if (space->dim() != u->space()->dim()) throw SolverError("newton: unknown does not match the test space");
  const Form J = gateaux_derivative(F, u, TrialFunction(u->space()));
  const auto fixed = bc_dofs(bcs);
  set_bc_values(u->dofs(), bcs);
  NewtonResult result;
  for (int it = 0;; ++it) {
    Eigen::VectorXd r = assemble_vector(F, space);
    zero_entries(r, fixed);
    const double norm = r.norm();
    result.residuals.push_back(norm);
    if (norm <= opts.tol) {
      result.iterations = it;
      return result;
    }
    if (it == opts.max_iter || !std::isfinite(norm)) {
      throw ConvergenceError("newton: no convergence after " + std::to_string(it) + " iterations (residual " +
                                 std::to_string(norm) + ")",
                             result.residuals);
    }
    SparseMatrix A = assemble_matrix(J, space, u->space());
    apply_dirichlet_rows(A, fixed);
    LUSolver lu(A);
    u->dofs() -= lu.solve(r);
  }
}

void displace_mesh(Mesh& mesh, const Function& theta) {
  const auto& s = *theta.space();
  if (s.is_boundary() || s.is_mixed() || s.element().degree != 1 || s.element().rank != 1 ||
      s.dim() != 2 * mesh.num_vertices()) {
    throw MeshError("mesh displacement must be a vector CG1 function on the mesh");
  }
  if (s.mesh().get() != &mesh) throw MeshError("mesh displacement lives on a different mesh");
  mesh.move({theta.dofs().data(), static_cast<std::size_t>(theta.dofs().size())});
}

void scatter_boundary(const Function& h, Function& out) {
  const auto& hs = *h.space();
  const auto& ts = *out.space();
  if (!hs.is_boundary()) throw MeshError("transfer_from_boundary: source must live on a boundary mesh");
  if (ts.is_boundary() || ts.is_mixed() || ts.element().degree != 1 || ts.element().rank != 1) {
    throw MeshError("transfer_from_boundary: target must be a vector CG1 space");
  }
  const auto& bm = *hs.boundary_mesh();
  if (bm.parent().get() != ts.mesh().get()) throw MeshError("transfer_from_boundary: mismatched parent mesh");
  const int nv = ts.mesh()->num_vertices();
  const int nb = bm.num_vertices();
  out.dofs().setZero();
  for (int i = 0; i < nb; ++i) {
    const int p = bm.vertex_map()[i];
    out.dofs()[p] = h.dofs()[i];
    out.dofs()[nv + p] = h.dofs()[nb + i];
  }
}

Eigen::VectorXd gather_boundary(const FunctionSpace& boundary_space, const Eigen::VectorXd& parent_values) {
  const auto& bm = *boundary_space.boundary_mesh();
  const int nv = bm.parent()->num_vertices();
  const int nb = bm.num_vertices();
  Eigen::VectorXd out(2 * nb);
  for (int i = 0; i < nb; ++i) {
    const int p = bm.vertex_map()[i];
    out[i] = parent_values[p];
    out[nb + i] = parent_values[nv + p];
  }
  return out;
}

void write_vtk(const Mesh& mesh, const std::vector<std::pair<std::string, const Function*>>& fields,
               const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "# vtk DataFile Version 3.0\nshapead\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& p : mesh.vertices()) out << p[0] << ' ' << p[1] << " 0\n";
  out << "CELLS " << mesh.num_cells() << ' ' << 4 * mesh.num_cells() << '\n';
  for (const auto& c : mesh.cells()) out << "3 " << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  out << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (int c = 0; c < mesh.num_cells(); ++c) out << "5\n";
  if (fields.empty()) return;
  out << "POINT_DATA " << mesh.num_vertices() << '\n';
  const int nv = mesh.num_vertices();
  for (const auto& [name, f] : fields) {
    if (f->space()->is_boundary() || f->space()->mesh().get() != &mesh) {
      throw Error("write_vtk: field '" + name + "' does not live on this mesh");
    }
    for (int sub = 0; sub < f->space()->num_sub(); ++sub) {
      const auto values = vertex_values(*f, sub);
      std::string label = name;
      if (f->space()->is_mixed()) label += "_" + std::to_string(sub);
      if (f->space()->element(sub).rank == 0) {
        out << "SCALARS " << label << " double 1\nLOOKUP_TABLE default\n";
        for (int v = 0; v < nv; ++v) out << values[v] << '\n';
      } else {
        out << "VECTORS " << label << " double\n";
        for (int v = 0; v < nv; ++v) out << values[v] << ' ' << values[nv + v] << " 0\n";
      }
    }
  }
  if (!out) throw Error("write_vtk: I/O failure writing " + path.string());
}

}  // namespace shapead
