#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "shapead/mesh.hpp"

namespace shapead {

/// Continuous Lagrange element: degree 1 or 2, scalar (rank 0) or 2-vector (rank 1).
struct Element {
  int degree = 1;
  int rank = 0;

  int scalar_local_dim() const { return degree == 1 ? 3 : 6; }
  int local_dim() const { return scalar_local_dim() * (rank == 0 ? 1 : 2); }
  bool operator==(const Element&) const = default;
};

/**
 * CG function space on a mesh, possibly a product of component spaces (Taylor-Hood).
 *
 * Dof layout: scalar CG1 dofs are vertices; CG2 dofs are vertices followed by edges.
 * Vector spaces are blocked by component (all x dofs, then all y dofs). Mixed spaces
 * concatenate their components, both globally and per cell.
 *
 * A space can also live on a BoundaryMesh (vector CG1 only); such spaces carry values
 * but cannot be used inside forms.
 */
class FunctionSpace {
 public:
  static std::shared_ptr<FunctionSpace> create(std::shared_ptr<Mesh> mesh, Element element);
  static std::shared_ptr<FunctionSpace> mixed(std::shared_ptr<Mesh> mesh, std::vector<Element> elements);
  static std::shared_ptr<FunctionSpace> on_boundary(std::shared_ptr<BoundaryMesh> boundary);

  const std::shared_ptr<Mesh>& mesh() const { return mesh_; }
  const std::shared_ptr<BoundaryMesh>& boundary_mesh() const { return boundary_; }
  bool is_boundary() const { return boundary_ != nullptr; }
  bool is_mixed() const { return elements_.size() > 1; }

  int num_sub() const { return static_cast<int>(elements_.size()); }
  const Element& element(int sub = 0) const { return elements_.at(sub); }
  int dim() const { return dim_; }
  int sub_offset(int sub) const { return offsets_.at(sub); }
  int sub_dim(int sub) const { return sub_dims_.at(sub); }
  int local_dim() const { return local_dim_; }
  int local_sub_offset(int sub) const { return local_offsets_.at(sub); }

  /// Global dofs of `cell` in local order (size local_dim()).
  void cell_dofs(int cell, std::span<int> out) const;

  /// Global dofs of component `sub` attached to marked facets with tag `tag`, and the
  /// position of each (vertex or edge midpoint) and value component it carries.
  struct DofLocation {
    int dof;
    Point x;
    int component;  // value component (0 for scalars)
    int va = -1;    // mesh vertices defining x (va == vb for vertex dofs)
    int vb = -1;
  };
  std::vector<DofLocation> boundary_dofs(int sub, int tag) const;
  /// Location of every dof in component `sub` (for interpolation).
  std::vector<DofLocation> dof_locations(int sub) const;

  std::uint64_t id() const { return id_; }
  std::string describe() const;

 private:
  FunctionSpace() = default;
  void finalize();

  std::shared_ptr<Mesh> mesh_;
  std::shared_ptr<BoundaryMesh> boundary_;
  std::vector<Element> elements_;
  std::vector<int> offsets_, sub_dims_, local_offsets_;
  int dim_ = 0;
  int local_dim_ = 0;
  std::uint64_t id_ = 0;
};

using SpacePtr = std::shared_ptr<const FunctionSpace>;

/// Coefficient vector in a FunctionSpace.
class Function {
 public:
  explicit Function(SpacePtr space, std::string name = {});

  const SpacePtr& space() const { return space_; }
  Eigen::VectorXd& dofs() { return dofs_; }
  const Eigen::VectorXd& dofs() const { return dofs_; }
  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  std::uint64_t id() const { return id_; }

  /// Dofs of component `sub` of a mixed function.
  Eigen::VectorXd sub_dofs(int sub) const;

 private:
  SpacePtr space_;
  Eigen::VectorXd dofs_;
  std::string name_;
  std::uint64_t id_;
};

using FunctionPtr = std::shared_ptr<Function>;

inline FunctionPtr make_function(SpacePtr space, std::string name = {}) {
  return std::make_shared<Function>(std::move(space), std::move(name));
}

/// Vector CG1 space on `mesh`, cached per mesh: the space of mesh displacements and of
/// shape gradients.
SpacePtr coordinate_space(const std::shared_ptr<Mesh>& mesh);

}  // namespace shapead
