#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace shapead {

using Point = std::array<double, 2>;
using CellVertices = std::array<int, 3>;
/// Undirected edge stored with the smaller vertex index first.
using EdgeKey = std::pair<int, int>;

inline EdgeKey make_edge(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

/// A boundary edge together with the cell that owns it.
struct BoundaryFacet {
  int edge = -1;        // global edge index
  int cell = -1;        // owning cell
  int local_edge = -1;  // local edge index in the owning cell (opposite local vertex)
  int tag = 0;
};

/**
 * Simplicial 2-D mesh.
 *
 * Cells are counter-clockwise triangles. Local edge k of a cell is the edge opposite
 * local vertex k, traversed counter-clockwise: e0 = (v1, v2), e1 = (v2, v0), e2 = (v0, v1).
 * Facet markers are attached to boundary edges only.
 *
 * Coordinates can be read or written as a blocked vector [x_0 .. x_{n-1}, y_0 .. y_{n-1}],
 * which is the dof layout of a vector CG1 function on the mesh.
 */
class Mesh {
 public:
  /// Clockwise cells are repaired by swapping two vertices (with a warning).
  Mesh(std::vector<Point> vertices, std::vector<CellVertices> cells,
       std::map<EdgeKey, int> facet_markers = {});

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<CellVertices>& cells() const { return cells_; }
  const std::vector<EdgeKey>& edges() const { return edges_; }
  const std::array<int, 3>& cell_edges(int cell) const { return cell_edges_[cell]; }
  const std::map<EdgeKey, int>& facet_markers() const { return facet_markers_; }
  const std::vector<BoundaryFacet>& marked_facets() const { return marked_facets_; }
  int edge_index(EdgeKey e) const;

  /// Marked facets whose tag is in `tags` (all marked facets when `tags` is empty).
  std::vector<BoundaryFacet> facets_with_tags(std::span<const int> tags) const;
  /// Sorted vertex indices lying on facets with the given tags.
  std::vector<int> vertices_with_tags(std::span<const int> tags) const;
  std::vector<int> tags() const;

  double signed_area(int cell) const;
  double total_area() const;
  /// Mean-ratio quality 4*sqrt(3)*A / sum(l^2); 1 for equilateral, <= 0 for inverted cells.
  double quality(int cell) const;
  double min_quality() const;

  std::vector<double> coordinates() const;
  void set_coordinates(std::span<const double> blocked);

  /// Adds a blocked displacement to every vertex. Throws DegenerateCellError (and leaves the
  /// mesh unchanged) when a cell's signed area drops to <= 1e-14 * mean cell area.
  void move(std::span<const double> displacement);

  /// Monotone counter bumped by every coordinate change.
  std::uint64_t geometry_version() const { return geometry_version_; }
  std::uint64_t id() const { return id_; }

 private:
  void build_topology();
  void check_markers();

  std::vector<Point> vertices_;
  std::vector<CellVertices> cells_;
  std::map<EdgeKey, int> facet_markers_;
  std::vector<EdgeKey> edges_;
  std::map<EdgeKey, int> edge_lookup_;
  std::vector<std::array<int, 3>> cell_edges_;
  std::vector<int> edge_cell_count_;
  std::vector<BoundaryFacet> marked_facets_;
  std::uint64_t geometry_version_ = 0;
  std::uint64_t id_;
};

/// Boundary vertices of a mesh (those incident to a marked facet).
class BoundaryMesh {
 public:
  explicit BoundaryMesh(std::shared_ptr<const Mesh> parent);

  const std::shared_ptr<const Mesh>& parent() const { return parent_; }
  int num_vertices() const { return static_cast<int>(vertex_map_.size()); }
  /// boundary-local index -> parent vertex index
  const std::vector<int>& vertex_map() const { return vertex_map_; }
  /// parent vertex index -> boundary-local index, -1 for interior vertices
  int local_index(int parent_vertex) const { return parent_to_local_[parent_vertex]; }
  /// Marked facets as pairs of boundary-local vertex indices, with tags.
  const std::vector<std::pair<EdgeKey, int>>& facets() const { return facets_; }

 private:
  std::shared_ptr<const Mesh> parent_;
  std::vector<int> vertex_map_;
  std::vector<int> parent_to_local_;
  std::vector<std::pair<EdgeKey, int>> facets_;
};

/// Throws MeshError when the mesh has no marked facet.
std::shared_ptr<BoundaryMesh> extract_boundary(std::shared_ptr<const Mesh> mesh);

/// Gmsh 2.2 ASCII reader: type-1 lines (physical tag = first tag) become facet markers,
/// type-2 triangles become cells; other element types are ignored.
std::shared_ptr<Mesh> load_mesh(const std::filesystem::path& path);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

struct MeshStats {
  int num_vertices;
  int num_cells;
  int num_edges;
  int num_marked_facets;
  double area;
  double min_quality;
  std::map<int, int> facets_per_tag;
};
MeshStats mesh_stats(const Mesh& mesh);

// Structured generators used by the case studies.

/// Unit disk with a circular hole at `hole_center`; outer boundary tag 1, hole tag 2.
/// Rings are blended linearly between the hole circle and the outer circle along rays of
/// equal angle.
std::shared_ptr<Mesh> annulus_mesh(double outer_radius, double hole_radius, Point hole_center,
                                   int n_angular, int n_radial);

/// Unit square channel with a circular obstacle. Tags: inflow (x=0) 1, outflow (x=1) 2,
/// walls (y=0, y=1) 3, obstacle 4. `grading` > 1 clusters rings toward the obstacle.
std::shared_ptr<Mesh> channel_mesh(Point obstacle_center, double obstacle_radius, int n_angular,
                                   int n_radial, double grading = 1.5);

/// Structured unit-square mesh split into 2*n*n triangles; boundary tagged 1.
std::shared_ptr<Mesh> unit_square_mesh(int n);

/// Rectangle [0,lx]x[0,ly] with nx*ny*2 cells. Tags: left 1, right 2, bottom 3, top 4.
std::shared_ptr<Mesh> rectangle_mesh(double lx, double ly, int nx, int ny);

}  // namespace shapead
