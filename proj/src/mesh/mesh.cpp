#include "shapead/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "shapead/error.hpp"

namespace shapead {

namespace {

std::uint64_t next_mesh_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter++;
}

double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
}

}  // namespace

Mesh::Mesh(std::vector<Point> vertices, std::vector<CellVertices> cells,
           std::map<EdgeKey, int> facet_markers)
    : vertices_(std::move(vertices)), cells_(std::move(cells)), id_(next_mesh_id()) {
  const int nv = num_vertices();
  if (cells_.empty()) throw MeshError("mesh has no cells");
  int repaired = 0;
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    auto& cell = cells_[c];
    for (int v : cell) {
      if (v < 0 || v >= nv) {
        throw MeshError("cell " + std::to_string(c) + " references vertex " + std::to_string(v) +
                        " but the mesh has " + std::to_string(nv) + " vertices");
      }
    }
    const double area = shapead::signed_area(vertices_[cell[0]], vertices_[cell[1]], vertices_[cell[2]]);
    if (area == 0.0) throw MeshError("cell " + std::to_string(c) + " has zero area");
    if (area < 0.0) {
      std::swap(cell[1], cell[2]);
      ++repaired;
    }
  }
  if (repaired > 0) {
    warn("repaired orientation of " + std::to_string(repaired) + " clockwise cell(s)");
  }
  for (const auto& [edge, tag] : facet_markers) facet_markers_[make_edge(edge.first, edge.second)] = tag;
  build_topology();
  check_markers();
}

void Mesh::build_topology() {
  edges_.clear();
  edge_lookup_.clear();
  edge_cell_count_.clear();
  cell_edges_.assign(cells_.size(), {-1, -1, -1});
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const auto& v = cells_[c];
    for (int k = 0; k < 3; ++k) {
      const EdgeKey key = make_edge(v[(k + 1) % 3], v[(k + 2) % 3]);
      auto [it, inserted] = edge_lookup_.try_emplace(key, static_cast<int>(edges_.size()));
      if (inserted) {
        edges_.push_back(key);
        edge_cell_count_.push_back(0);
      }
      ++edge_cell_count_[it->second];
      cell_edges_[c][k] = it->second;
    }
  }
}

void Mesh::check_markers() {
  for (const auto& [edge, tag] : facet_markers_) {
    auto it = edge_lookup_.find(edge);
    if (it == edge_lookup_.end()) {
      throw MeshError("marked facet (" + std::to_string(edge.first) + ", " + std::to_string(edge.second) +
                      ") with tag " + std::to_string(tag) + " is not an edge of the mesh");
    }
    if (edge_cell_count_[it->second] != 1) {
      throw MeshError("marked facet (" + std::to_string(edge.first) + ", " + std::to_string(edge.second) +
                      ") with tag " + std::to_string(tag) + " is not on the boundary");
    }
  }
  auto& facets = marked_facets_;
  facets.clear();
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    for (int k = 0; k < 3; ++k) {
      const int e = cell_edges_[c][k];
      auto it = facet_markers_.find(edges_[e]);
      if (it != facet_markers_.end()) {
        facets.push_back({e, static_cast<int>(c), k, it->second});
      }
    }
  }
  std::sort(facets.begin(), facets.end(),
            [](const BoundaryFacet& a, const BoundaryFacet& b) { return a.edge < b.edge; });
}

int Mesh::edge_index(EdgeKey e) const {
  auto it = edge_lookup_.find(make_edge(e.first, e.second));
  return it == edge_lookup_.end() ? -1 : it->second;
}

std::vector<BoundaryFacet> Mesh::facets_with_tags(std::span<const int> tags) const {
  std::vector<BoundaryFacet> out;
  for (const auto& f : marked_facets_) {
    if (tags.empty() || std::find(tags.begin(), tags.end(), f.tag) != tags.end()) out.push_back(f);
  }
  return out;
}

std::vector<int> Mesh::vertices_with_tags(std::span<const int> tags) const {
  std::set<int> verts;
  for (const auto& f : facets_with_tags(tags)) {
    verts.insert(edges_[f.edge].first);
    verts.insert(edges_[f.edge].second);
  }
  return {verts.begin(), verts.end()};
}

std::vector<int> Mesh::tags() const {
  std::set<int> t;
  for (const auto& [edge, tag] : facet_markers_) t.insert(tag);
  return {t.begin(), t.end()};
}

double Mesh::signed_area(int cell) const {
  const auto& v = cells_[cell];
  return shapead::signed_area(vertices_[v[0]], vertices_[v[1]], vertices_[v[2]]);
}

double Mesh::total_area() const {
  double sum = 0.0;
  for (int c = 0; c < num_cells(); ++c) sum += signed_area(c);
  return sum;
}

double Mesh::quality(int cell) const {
  const auto& v = cells_[cell];
  double l2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Point& a = vertices_[v[k]];
    const Point& b = vertices_[v[(k + 1) % 3]];
    l2 += (b[0] - a[0]) * (b[0] - a[0]) + (b[1] - a[1]) * (b[1] - a[1]);
  }
  return 4.0 * std::sqrt(3.0) * signed_area(cell) / l2;
}

double Mesh::min_quality() const {
  double q = 1.0;
  for (int c = 0; c < num_cells(); ++c) q = std::min(q, quality(c));
  return q;
}

std::vector<double> Mesh::coordinates() const {
  const int nv = num_vertices();
  std::vector<double> out(2 * nv);
  for (int v = 0; v < nv; ++v) {
    out[v] = vertices_[v][0];
    out[nv + v] = vertices_[v][1];
  }
  return out;
}

void Mesh::set_coordinates(std::span<const double> blocked) {
  const int nv = num_vertices();
  if (static_cast<int>(blocked.size()) != 2 * nv) {
    throw MeshError("coordinate vector has length " + std::to_string(blocked.size()) + ", expected " +
                    std::to_string(2 * nv));
  }
  for (int v = 0; v < nv; ++v) vertices_[v] = {blocked[v], blocked[nv + v]};
  ++geometry_version_;
}

void Mesh::move(std::span<const double> displacement) {
  const int nv = num_vertices();
  if (static_cast<int>(displacement.size()) != 2 * nv) {
    throw MeshError("displacement has length " + std::to_string(displacement.size()) + ", expected " +
                    std::to_string(2 * nv));
  }
  const double threshold = 1e-14 * std::abs(total_area()) / num_cells();
  const std::vector<Point> saved = vertices_;
  for (int v = 0; v < nv; ++v) {
    vertices_[v][0] += displacement[v];
    vertices_[v][1] += displacement[nv + v];
  }
  ++geometry_version_;
  for (int c = 0; c < num_cells(); ++c) {
    const double area = signed_area(c);
    if (area <= threshold) {
      vertices_ = saved;
      ++geometry_version_;
      throw DegenerateCellError(c, area);
    }
  }
}

BoundaryMesh::BoundaryMesh(std::shared_ptr<const Mesh> parent) : parent_(std::move(parent)) {
  if (parent_->marked_facets().empty()) throw MeshError("mesh has no marked boundary facets");
  vertex_map_ = parent_->vertices_with_tags({});
  parent_to_local_.assign(parent_->num_vertices(), -1);
  for (std::size_t i = 0; i < vertex_map_.size(); ++i) parent_to_local_[vertex_map_[i]] = static_cast<int>(i);
  for (const auto& f : parent_->marked_facets()) {
    const auto& e = parent_->edges()[f.edge];
    facets_.push_back({{parent_to_local_[e.first], parent_to_local_[e.second]}, f.tag});
  }
}

std::shared_ptr<BoundaryMesh> extract_boundary(std::shared_ptr<const Mesh> mesh) {
  return std::make_shared<BoundaryMesh>(std::move(mesh));
}

MeshStats mesh_stats(const Mesh& mesh) {
  MeshStats s{mesh.num_vertices(), mesh.num_cells(), mesh.num_edges(),
              static_cast<int>(mesh.marked_facets().size()), mesh.total_area(), mesh.min_quality(), {}};
  for (const auto& f : mesh.marked_facets()) ++s.facets_per_tag[f.tag];
  return s;
}

}  // namespace shapead
