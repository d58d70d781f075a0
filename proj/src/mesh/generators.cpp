#include <cmath>
#include <numbers>

#include "shapead/error.hpp"
#include "shapead/mesh.hpp"

namespace shapead {

namespace {

double orient(const std::vector<Point>& x, const CellVertices& c) {
  return (x[c[1]][0] - x[c[0]][0]) * (x[c[2]][1] - x[c[0]][1]) -
         (x[c[2]][0] - x[c[0]][0]) * (x[c[1]][1] - x[c[0]][1]);
}

void push_ccw(std::vector<CellVertices>& cells, const std::vector<Point>& x, CellVertices c) {
  if (orient(x, c) < 0.0) std::swap(c[1], c[2]);
  cells.push_back(c);
}

// Triangulates a ring-structured grid: ring i (0..nr), angular index j (periodic, 0..na-1).
std::vector<CellVertices> ring_cells(const std::vector<Point>& x, int na, int nr) {
  std::vector<CellVertices> cells;
  cells.reserve(2 * na * nr);
  auto id = [na](int i, int j) { return i * na + (j % na); };
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < na; ++j) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if ((i + j) % 2 == 0) {
        push_ccw(cells, x, {a, b, c});
        push_ccw(cells, x, {a, c, d});
      } else {
        push_ccw(cells, x, {a, b, d});
        push_ccw(cells, x, {b, c, d});
      }
    }
  }
  return cells;
}

}  // namespace

std::shared_ptr<Mesh> annulus_mesh(double outer_radius, double hole_radius, Point hole_center,
                                   int n_angular, int n_radial) {
  if (n_angular < 8 || n_radial < 1) throw MeshError("annulus_mesh: resolution too small");
  if (std::hypot(hole_center[0], hole_center[1]) + hole_radius >= outer_radius) {
    throw MeshError("annulus_mesh: hole does not fit inside the outer circle");
  }
  std::vector<Point> x;
  x.reserve((n_radial + 1) * n_angular);
  for (int i = 0; i <= n_radial; ++i) {
    const double s = static_cast<double>(i) / n_radial;
    for (int j = 0; j < n_angular; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / n_angular;
      const Point inner{hole_center[0] + hole_radius * std::cos(phi), hole_center[1] + hole_radius * std::sin(phi)};
      const Point outer{outer_radius * std::cos(phi), outer_radius * std::sin(phi)};
      x.push_back({(1.0 - s) * inner[0] + s * outer[0], (1.0 - s) * inner[1] + s * outer[1]});
    }
  }
  auto cells = ring_cells(x, n_angular, n_radial);
  std::map<EdgeKey, int> markers;
  for (int j = 0; j < n_angular; ++j) {
    markers[make_edge(j, (j + 1) % n_angular)] = 2;
    markers[make_edge(n_radial * n_angular + j, n_radial * n_angular + (j + 1) % n_angular)] = 1;
  }
  return std::make_shared<Mesh>(std::move(x), std::move(cells), std::move(markers));
}

std::shared_ptr<Mesh> channel_mesh(Point obstacle_center, double obstacle_radius, int n_angular,
                                   int n_radial, double grading) {
  if (n_angular < 8 || n_angular % 4 != 0) throw MeshError("channel_mesh: n_angular must be a multiple of 4");
  if (n_radial < 1) throw MeshError("channel_mesh: n_radial must be positive");
  const double cx = obstacle_center[0], cy = obstacle_center[1];
  if (cx - obstacle_radius <= 0.0 || cx + obstacle_radius >= 1.0 || cy - obstacle_radius <= 0.0 ||
      cy + obstacle_radius >= 1.0) {
    throw MeshError("channel_mesh: obstacle does not fit inside the unit square");
  }
  // Outer points are spaced uniformly along the square perimeter, starting at corner (1, 1)
  // and running counter-clockwise.
  const int per_side = n_angular / 4;
  std::vector<Point> outer(n_angular);
  for (int j = 0; j < n_angular; ++j) {
    const int side = j / per_side;
    const double t = static_cast<double>(j % per_side) / per_side;
    switch (side) {
      case 0: outer[j] = {1.0 - t, 1.0}; break;
      case 1: outer[j] = {0.0, 1.0 - t}; break;
      case 2: outer[j] = {t, 0.0}; break;
      default: outer[j] = {1.0, t}; break;
    }
  }
  std::vector<Point> x;
  x.reserve((n_radial + 1) * n_angular);
  for (int i = 0; i <= n_radial; ++i) {
    const double s = std::pow(static_cast<double>(i) / n_radial, grading);
    for (int j = 0; j < n_angular; ++j) {
      const double phi = std::atan2(outer[j][1] - cy, outer[j][0] - cx);
      const Point inner{cx + obstacle_radius * std::cos(phi), cy + obstacle_radius * std::sin(phi)};
      x.push_back({(1.0 - s) * inner[0] + s * outer[j][0], (1.0 - s) * inner[1] + s * outer[j][1]});
    }
  }
  auto cells = ring_cells(x, n_angular, n_radial);
  std::map<EdgeKey, int> markers;
  const int o = n_radial * n_angular;
  for (int j = 0; j < n_angular; ++j) {
    const int a = j, b = (j + 1) % n_angular;
    markers[make_edge(a, b)] = 4;
    const Point mid{0.5 * (x[o + a][0] + x[o + b][0]), 0.5 * (x[o + a][1] + x[o + b][1])};
    int tag = 3;
    if (mid[0] < 1e-12) tag = 1;
    else if (mid[0] > 1.0 - 1e-12) tag = 2;
    markers[make_edge(o + a, o + b)] = tag;
  }
  return std::make_shared<Mesh>(std::move(x), std::move(cells), std::move(markers));
}

std::shared_ptr<Mesh> rectangle_mesh(double lx, double ly, int nx, int ny) {
  if (nx < 1 || ny < 1) throw MeshError("rectangle_mesh: resolution must be positive");
  std::vector<Point> x;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) x.push_back({lx * i / nx, ly * j / ny});
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<CellVertices> cells;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  std::map<EdgeKey, int> markers;
  for (int j = 0; j < ny; ++j) {
    markers[make_edge(id(0, j), id(0, j + 1))] = 1;
    markers[make_edge(id(nx, j), id(nx, j + 1))] = 2;
  }
  for (int i = 0; i < nx; ++i) {
    markers[make_edge(id(i, 0), id(i + 1, 0))] = 3;
    markers[make_edge(id(i, ny), id(i + 1, ny))] = 4;
  }
  return std::make_shared<Mesh>(std::move(x), std::move(cells), std::move(markers));
}

std::shared_ptr<Mesh> unit_square_mesh(int n) {
  auto m = rectangle_mesh(1.0, 1.0, n, n);
  std::map<EdgeKey, int> markers;
  for (const auto& [e, tag] : m->facet_markers()) markers[e] = 1;
  return std::make_shared<Mesh>(m->vertices(), m->cells(), std::move(markers));
}

}  // namespace shapead
