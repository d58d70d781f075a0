#include "shapead/space.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <set>

#include "shapead/error.hpp"

namespace shapead {

namespace {

std::uint64_t next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter++;
}

int scalar_dim(const Mesh& mesh, int degree) {
  return degree == 1 ? mesh.num_vertices() : mesh.num_vertices() + mesh.num_edges();
}

void check_element(const Element& e) {
  if (e.degree != 1 && e.degree != 2) throw FormError("only CG1 and CG2 elements are supported");
  if (e.rank != 0 && e.rank != 1) throw FormError("only scalar and 2-vector elements are supported");
}

}  // namespace

std::shared_ptr<FunctionSpace> FunctionSpace::create(std::shared_ptr<Mesh> mesh, Element element) {
  return mixed(std::move(mesh), {element});
}

std::shared_ptr<FunctionSpace> FunctionSpace::mixed(std::shared_ptr<Mesh> mesh, std::vector<Element> elements) {
  if (!mesh) throw FormError("function space needs a mesh");
  if (elements.empty()) throw FormError("function space needs at least one element");
  for (const auto& e : elements) check_element(e);
  std::shared_ptr<FunctionSpace> s(new FunctionSpace());
  s->mesh_ = std::move(mesh);
  s->elements_ = std::move(elements);
  s->finalize();
  return s;
}

std::shared_ptr<FunctionSpace> FunctionSpace::on_boundary(std::shared_ptr<BoundaryMesh> boundary) {
  std::shared_ptr<FunctionSpace> s(new FunctionSpace());
  s->boundary_ = std::move(boundary);
  s->elements_ = {Element{1, 1}};
  s->offsets_ = {0};
  s->sub_dims_ = {2 * s->boundary_->num_vertices()};
  s->local_offsets_ = {0};
  s->dim_ = s->sub_dims_[0];
  s->local_dim_ = 0;
  s->id_ = next_id();
  return s;
}

void FunctionSpace::finalize() {
  int offset = 0, local = 0;
  for (const auto& e : elements_) {
    const int d = scalar_dim(*mesh_, e.degree) * (e.rank == 0 ? 1 : 2);
    offsets_.push_back(offset);
    sub_dims_.push_back(d);
    local_offsets_.push_back(local);
    offset += d;
    local += e.local_dim();
  }
  dim_ = offset;
  local_dim_ = local;
  id_ = next_id();
}

void FunctionSpace::cell_dofs(int cell, std::span<int> out) const {
  const auto& verts = mesh_->cells()[cell];
  const auto& edges = mesh_->cell_edges(cell);
  const int nv = mesh_->num_vertices();
  for (int s = 0; s < num_sub(); ++s) {
    const Element& e = elements_[s];
    const int nloc = e.scalar_local_dim();
    const int nscalar = scalar_dim(*mesh_, e.degree);
    const int ncomp = e.rank == 0 ? 1 : 2;
    for (int c = 0; c < ncomp; ++c) {
      const int base = offsets_[s] + c * nscalar;
      int* o = out.data() + local_offsets_[s] + c * nloc;
      for (int k = 0; k < 3; ++k) o[k] = base + verts[k];
      if (e.degree == 2)
        for (int k = 0; k < 3; ++k) o[3 + k] = base + nv + edges[k];
    }
  }
}

std::vector<FunctionSpace::DofLocation> FunctionSpace::dof_locations(int sub) const {
  if (is_boundary()) throw FormError("dof locations are not defined on boundary spaces");
  const Element& e = elements_.at(sub);
  const int nscalar = scalar_dim(*mesh_, e.degree);
  const int ncomp = e.rank == 0 ? 1 : 2;
  std::vector<DofLocation> out;
  out.reserve(nscalar * ncomp);
  const auto& x = mesh_->vertices();
  for (int c = 0; c < ncomp; ++c) {
    const int base = offsets_[sub] + c * nscalar;
    for (int v = 0; v < mesh_->num_vertices(); ++v) out.push_back({base + v, x[v], c, v, v});
    if (e.degree == 2) {
      for (int k = 0; k < mesh_->num_edges(); ++k) {
        const auto& [a, b] = mesh_->edges()[k];
        out.push_back({base + mesh_->num_vertices() + k,
                       {0.5 * (x[a][0] + x[b][0]), 0.5 * (x[a][1] + x[b][1])}, c, a, b});
      }
    }
  }
  return out;
}

std::vector<FunctionSpace::DofLocation> FunctionSpace::boundary_dofs(int sub, int tag) const {
  if (is_boundary()) throw FormError("boundary dofs are not defined on boundary spaces");
  const Element& e = elements_.at(sub);
  const int nscalar = scalar_dim(*mesh_, e.degree);
  const int ncomp = e.rank == 0 ? 1 : 2;
  const int tags[] = {tag};
  const auto facets = mesh_->facets_with_tags(tags);
  if (facets.empty()) throw FormError("no facets carry marker tag " + std::to_string(tag));
  std::set<int> scalar_dofs;
  for (const auto& f : facets) {
    const auto& [a, b] = mesh_->edges()[f.edge];
    scalar_dofs.insert(a);
    scalar_dofs.insert(b);
    if (e.degree == 2) scalar_dofs.insert(mesh_->num_vertices() + f.edge);
  }
  const auto& x = mesh_->vertices();
  std::vector<DofLocation> out;
  for (int c = 0; c < ncomp; ++c) {
    for (int d : scalar_dofs) {
      if (d < mesh_->num_vertices()) {
        out.push_back({offsets_[sub] + c * nscalar + d, x[d], c, d, d});
      } else {
        const auto& [a, b] = mesh_->edges()[d - mesh_->num_vertices()];
        out.push_back({offsets_[sub] + c * nscalar + d, {0.5 * (x[a][0] + x[b][0]), 0.5 * (x[a][1] + x[b][1])}, c, a, b});
      }
    }
  }
  return out;
}

std::string FunctionSpace::describe() const {
  std::string s;
  for (std::size_t k = 0; k < elements_.size(); ++k) {
    if (k) s += " x ";
    s += (elements_[k].rank == 1 ? "vector CG" : "CG") + std::to_string(elements_[k].degree);
  }
  if (is_boundary()) s += " on boundary";
  return s;
}

Function::Function(SpacePtr space, std::string name)
    : space_(std::move(space)), dofs_(Eigen::VectorXd::Zero(space_->dim())), name_(std::move(name)), id_(next_id()) {}

Eigen::VectorXd Function::sub_dofs(int sub) const {
  return dofs_.segment(space_->sub_offset(sub), space_->sub_dim(sub));
}

SpacePtr coordinate_space(const std::shared_ptr<Mesh>& mesh) {
  static std::mutex mutex;
  static std::map<std::uint64_t, std::weak_ptr<FunctionSpace>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[mesh->id()];
  if (auto s = slot.lock()) return s;
  auto s = FunctionSpace::create(mesh, Element{1, 1});
  slot = s;
  return s;
}

}  // namespace shapead
