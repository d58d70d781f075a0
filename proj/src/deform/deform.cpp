#include <algorithm>
#include <cmath>
#include <set>

#include "shapead/deform.hpp"
#include "shapead/error.hpp"

namespace shapead {

namespace {

Expr zero_value(const SpacePtr& space) {
  if (space->element().rank == 0) return constant(0.0);
  return as_vector({constant(0.0), constant(0.0)});
}

std::vector<int> tagged_dofs(const SpacePtr& space, const std::vector<int>& tags) {
  std::set<int> dofs;
  for (int tag : tags)
    for (const auto& loc : space->boundary_dofs(0, tag)) dofs.insert(loc.dof);
  return {dofs.begin(), dofs.end()};
}

void check_plain(const SpacePtr& space, const char* what) {
  if (space->is_mixed() || space->is_boundary()) {
    throw FormError(std::string(what) + ": needs a scalar or vector CG space on a mesh");
  }
}

// P1 facet mass of a vector field on a boundary space; blocked [x..., y...] layout.
SparseMatrix boundary_mass(const FunctionSpace& space, const std::vector<int>& support, std::vector<int>& off) {
  const auto& bm = *space.boundary_mesh();
  const auto& X = bm.parent()->vertices();
  const int nb = bm.num_vertices();
  std::vector<Eigen::Triplet<double>> t;
  std::vector<char> covered(nb, 0);
  for (const auto& [e, tag] : bm.facets()) {
    if (!support.empty() && std::find(support.begin(), support.end(), tag) == support.end()) continue;
    const auto& a = X[bm.vertex_map()[e.first]];
    const auto& b = X[bm.vertex_map()[e.second]];
    const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
    const int v[2] = {e.first, e.second};
    covered[e.first] = covered[e.second] = 1;
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) t.emplace_back(c * nb + v[i], c * nb + v[j], len / (i == j ? 3.0 : 6.0));
  }
  for (int i = 0; i < nb; ++i) {
    if (covered[i]) continue;
    off.push_back(i);
    off.push_back(nb + i);
  }
  std::sort(off.begin(), off.end());
  SparseMatrix M(2 * nb, 2 * nb);
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

}  // namespace

RieszMap::RieszMap(SpacePtr space, RieszKind kind, SparseMatrix M, std::vector<int> fixed)
    : space_(std::move(space)), kind_(kind), M_(std::move(M)), fixed_(std::move(fixed)) {
  SparseMatrix A = M_;
  apply_dirichlet_rows(A, fixed_);
  // Symmetric elimination: constrained columns carry zero values anyway.
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      if (it.row() != it.col() && std::binary_search(fixed_.begin(), fixed_.end(), static_cast<int>(it.col())))
        it.valueRef() = 0.0;
  try {
    lu_ = std::make_shared<LUSolver>(A);
  } catch (const SolverError& e) {
    throw SolverError(std::string("Riesz map is singular: ") + e.what());
  }
}

RieszMap RieszMap::l2(SpacePtr space, std::vector<int> zero_tags, std::vector<int> support_tags) {
  if (space->is_boundary()) {
    std::vector<int> off;
    SparseMatrix M = boundary_mass(*space, support_tags, off);
    return RieszMap(space, RieszKind::L2, std::move(M), std::move(off));
  }
  check_plain(space, "l2 Riesz map");
  const auto& mesh = space->mesh();
  const Expr u = TrialFunction(space), v = TestFunction(space);
  SparseMatrix M = assemble_matrix(shapead::inner(u, v) * dx(mesh));
  return RieszMap(space, RieszKind::L2, std::move(M), tagged_dofs(space, zero_tags));
}

RieszMap RieszMap::h1(SpacePtr space, std::vector<int> zero_tags) {
  check_plain(space, "h1 Riesz map");
  const auto& mesh = space->mesh();
  const Expr u = TrialFunction(space), v = TestFunction(space);
  SparseMatrix M = assemble_matrix(shapead::inner(u, v) * dx(mesh) + shapead::inner(grad(u), grad(v)) * dx(mesh));
  return RieszMap(space, RieszKind::H1, std::move(M), tagged_dofs(space, zero_tags));
}

RieszMap RieszMap::elasticity(SpacePtr space, FunctionPtr mu, double lambda, std::vector<int> zero_tags) {
  check_plain(space, "elasticity Riesz map");
  if (space->element().rank != 1) throw FormError("elasticity Riesz map: needs a vector space");
  if (zero_tags.empty()) throw SolverError("elasticity Riesz map: rigid motions are not excluded without zero tags");
  const auto& mesh = space->mesh();
  const Expr u = TrialFunction(space), v = TestFunction(space);
  const Expr m = mu ? coefficient(mu) : constant(1.0);
  Form a = 2.0 * (m * shapead::inner(sym(grad(u)), sym(grad(v)))) * dx(mesh);
  if (lambda != 0.0) a = a + (constant(lambda) * div(u) * div(v)) * dx(mesh);
  SparseMatrix M = assemble_matrix(a);
  return RieszMap(space, RieszKind::Elasticity, std::move(M), tagged_dofs(space, zero_tags));
}

Eigen::VectorXd RieszMap::representation(const Eigen::VectorXd& g) const {
  if (g.size() != M_.rows()) {
    throw Error("Riesz representation: co-vector has dimension " + std::to_string(g.size()) + ", expected " +
                std::to_string(M_.rows()));
  }
  Eigen::VectorXd b = g;
  zero_entries(b, fixed_);
  Eigen::VectorXd r = lu_->solve(b);
  zero_entries(r, fixed_);
  return r;
}

double RieszMap::dual_norm(const Eigen::VectorXd& g) const {
  Eigen::VectorXd b = g;
  zero_entries(b, fixed_);
  return std::sqrt(std::max(0.0, b.dot(representation(g))));
}

FunctionPtr riesz_representation(const RieszMap& map, const Eigen::VectorXd& g) {
  auto r = make_function(map.space(), "riesz");
  r->dofs() = map.representation(g);
  return r;
}

LameField solve_lame_field(const std::shared_ptr<Mesh>& mesh, const std::vector<int>& outer_tags,
                           const std::vector<int>& obstacle_tags, double outer_value, double obstacle_value) {
  if (outer_tags.empty() || obstacle_tags.empty()) throw MeshError("Lame field: both tag sets must be nonempty");
  auto V = FunctionSpace::create(mesh, {1, 0});
  LameField out;
  out.mu = make_function(V, "mu");
  BCs bcs;
  for (int t : outer_tags) bcs.emplace_back(V, constant(outer_value), t);
  for (int t : obstacle_tags) bcs.emplace_back(V, constant(obstacle_value), t);
  const Expr u = TrialFunction(V), v = TestFunction(V);
  StopAnnotating stop;
  solve_linear_system(inner(grad(u), grad(v)) * dx(mesh), constant(0.0) * v * dx(mesh), bcs, *out.mu);
  return out;
}

FunctionPtr elasticity_extend(const std::shared_ptr<Mesh>& mesh, const FunctionPtr& h, const LameField& lame,
                              const std::vector<int>& zero_tags, int traction_tag) {
  if (zero_tags.empty()) throw SolverError("elasticity extension: no Dirichlet part, the system is singular");
  auto W = coordinate_space(mesh);
  if (h->space()->dim() != W->dim() || h->space()->is_boundary()) {
    throw FormError("elasticity extension: h must be a vector CG1 function on the mesh");
  }
  auto s = make_function(W, "s");
  const Expr u = TrialFunction(W), t = TestFunction(W);
  const Expr mu = lame.mu ? coefficient(lame.mu) : constant(1.0);
  Form a = 2.0 * (mu * inner(sym(grad(u)), sym(grad(t)))) * dx(mesh);
  if (lame.lambda != 0.0) a = a + (constant(lame.lambda) * div(u) * div(t)) * dx(mesh);
  const Form L = inner(coefficient(h), t) * ds(mesh)(traction_tag);
  BCs bcs;
  for (int tag : zero_tags) bcs.emplace_back(W, zero_value(W), tag);
  solve_linear(a, L, s, bcs);
  return s;
}

}  // namespace shapead
