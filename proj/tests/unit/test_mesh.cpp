#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "shapead/assemble.hpp"
#include "shapead/error.hpp"
#include "shapead/mesh.hpp"
#include "shapead/solve.hpp"

using namespace shapead;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << contents;
  return p;
}

std::shared_ptr<Mesh> unit_triangle(bool mark_all = true) {
  std::map<EdgeKey, int> markers;
  if (mark_all) markers = {{{0, 1}, 1}, {{1, 2}, 1}, {{0, 2}, 1}};
  return std::make_shared<Mesh>(std::vector<Point>{{0, 0}, {1, 0}, {0, 1}}, std::vector<CellVertices>{{0, 1, 2}},
                                markers);
}

struct WarningCapture {
  std::vector<std::string> messages;
  WarningHandler previous;
  WarningCapture() {
    previous = set_warning_handler([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~WarningCapture() { set_warning_handler(previous); }
};

const char* kSingle =
    "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n"
    "$Elements\n4\n1 1 2 7 1 1 2\n2 1 2 7 1 2 3\n3 1 2 8 1 3 1\n4 2 2 0 1 1 2 3\n$EndElements\n";

}  // namespace

TEST_CASE("load a single triangle") {
  auto m = load_mesh(temp_file("shapead_single.msh", kSingle));
  CHECK(m->num_cells() == 1);
  CHECK(m->num_vertices() == 3);
  CHECK(m->total_area() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(m->facet_markers().size() == 3);
  CHECK(m->tags() == std::vector<int>{7, 8});
}

TEST_CASE("clockwise triangle is repaired with a warning") {
  WarningCapture w;
  std::string text = kSingle;
  text.replace(text.find("4 2 2 0 1 1 2 3"), 15, "4 2 2 0 1 1 3 2");
  auto m = load_mesh(temp_file("shapead_cw.msh", text));
  CHECK(m->signed_area(0) == doctest::Approx(0.5));
  CHECK(w.messages.size() == 1);
}

TEST_CASE("malformed and dangling files are rejected") {
  CHECK_THROWS_AS(load_mesh(temp_file("shapead_bad.msh", "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n2\n1 0 0\n")),
                  ParseError);
  // Two cells; the shared diagonal is not a boundary edge.
  const char* dangling =
      "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n"
      "$Elements\n3\n1 1 2 1 1 1 3\n2 2 2 0 1 1 2 3\n3 2 2 0 1 1 3 4\n$EndElements\n";
  CHECK_THROWS_AS(load_mesh(temp_file("shapead_dangling.msh", dangling)), MeshError);
  CHECK_THROWS(load_mesh("/nonexistent/file.msh"));
}

TEST_CASE("gmsh round trip") {
  auto m = annulus_mesh(1.0, 0.2, {0.5, 0.0}, 32, 6);
  auto p = std::filesystem::temp_directory_path() / "shapead_roundtrip.msh";
  save_mesh(*m, p);
  auto r = load_mesh(p);
  CHECK(r->cells() == m->cells());
  CHECK(r->facet_markers() == m->facet_markers());
  for (int v = 0; v < m->num_vertices(); ++v) {
    CHECK(std::abs(r->vertices()[v][0] - m->vertices()[v][0]) <= 1e-12);
    CHECK(std::abs(r->vertices()[v][1] - m->vertices()[v][1]) <= 1e-12);
  }
}

TEST_CASE("annulus generator carries two tags") {
  auto m = annulus_mesh(1.0, 0.2, {0.5, 0.0}, 64, 16);
  CHECK(m->tags() == std::vector<int>{1, 2});
  CHECK(m->num_cells() == 2 * 64 * 16);
  // Area of the unit disk minus the hole, up to polygonal approximation.
  const double exact = M_PI * (1.0 - 0.04);
  CHECK(std::abs(m->total_area() - exact) < 0.01);
  CHECK(m->min_quality() > 0.2);
}

TEST_CASE("move: translation, inverse move and collapse") {
  auto m = unit_triangle();
  auto V = coordinate_space(m);
  Function theta(V);
  theta.dofs() << 1, 1, 1, 0, 0, 0;
  displace_mesh(*m, theta);
  CHECK(m->vertices()[0] == Point{1, 0});
  CHECK(m->vertices()[1] == Point{2, 0});
  CHECK(m->vertices()[2] == Point{1, 1});

  auto a = annulus_mesh(1.0, 0.2, {0.5, 0.0}, 32, 6);
  const auto before = a->coordinates();
  Function t(coordinate_space(a));
  for (int i = 0; i < t.dofs().size(); ++i) t.dofs()[i] = 1e-3 * std::sin(0.37 * i);
  displace_mesh(*a, t);
  t.dofs() = -t.dofs();
  displace_mesh(*a, t);
  const auto after = a->coordinates();
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(std::abs(after[i] - before[i]) <= 1e-14);

  auto u = unit_triangle();
  Function collapse(coordinate_space(u));
  collapse.dofs() << 0, -1, 0, 0, 0, -1;
  CHECK_THROWS_AS(displace_mesh(*u, collapse), DegenerateCellError);
  CHECK(u->vertices()[1] == Point{1, 0});  // unchanged after the failed move
}

TEST_CASE("area after a move matches assembled volume") {
  auto m = annulus_mesh(1.0, 0.2, {0.5, 0.0}, 32, 8);
  Function t(coordinate_space(m));
  for (int i = 0; i < t.dofs().size(); ++i) t.dofs()[i] = 2e-3 * std::cos(1.3 * i);
  displace_mesh(*m, t);
  double sum = 0.0;
  for (int c = 0; c < m->num_cells(); ++c) sum += m->signed_area(c);
  CHECK(std::abs(assemble_scalar(constant(1.0) * dx(m)) - sum) <= 1e-13 * sum);
}

TEST_CASE("extract_boundary") {
  CHECK(extract_boundary(unit_triangle())->num_vertices() == 3);
  auto square = std::make_shared<Mesh>(std::vector<Point>{{0, 0}, {1, 0}, {1, 1}, {0, 1}},
                                       std::vector<CellVertices>{{0, 1, 2}, {0, 2, 3}},
                                       std::map<EdgeKey, int>{{{0, 1}, 3}});
  CHECK(extract_boundary(square)->num_vertices() == 2);
  CHECK_THROWS_AS(extract_boundary(unit_triangle(false)), MeshError);

  auto channel = channel_mesh({0.5, 0.5}, 0.13, 48, 10);
  auto b = extract_boundary(channel);
  const int tags_outer[] = {1, 2, 3};
  const int tags_obstacle[] = {4};
  CHECK(b->num_vertices() ==
        static_cast<int>(channel->vertices_with_tags(tags_outer).size() + channel->vertices_with_tags(tags_obstacle).size()));
}

TEST_CASE("transfer from boundary and its transpose") {
  auto m = unit_triangle();
  auto bs = FunctionSpace::on_boundary(extract_boundary(m));
  Function h(bs), out(coordinate_space(m));
  h.dofs().setOnes();
  scatter_boundary(h, out);
  CHECK(out.dofs() == Eigen::VectorXd::Ones(6));
  h.dofs().setZero();
  scatter_boundary(h, out);
  CHECK(out.dofs().isZero(0));

  auto c = channel_mesh({0.5, 0.5}, 0.13, 32, 6);
  auto cbs = FunctionSpace::on_boundary(extract_boundary(c));
  Function hc(cbs), oc(coordinate_space(c));
  for (int i = 0; i < hc.dofs().size(); ++i) hc.dofs()[i] = std::sin(1.0 + i);
  scatter_boundary(hc, oc);
  CHECK((gather_boundary(*cbs, oc.dofs()) - hc.dofs()).norm() == 0.0);
  // Interior vertices receive zero.
  int interior_nonzero = 0;
  for (int v = 0; v < c->num_vertices(); ++v)
    if (cbs->boundary_mesh()->local_index(v) < 0 && oc.dofs()[v] != 0.0) ++interior_nonzero;
  CHECK(interior_nonzero == 0);

  auto other = unit_triangle();
  Function wrong(coordinate_space(other));
  CHECK_THROWS_AS(scatter_boundary(hc, wrong), MeshError);
}

TEST_CASE("vtk output") {
  auto m = unit_triangle();
  auto W = FunctionSpace::create(m, {1, 0});
  Function f(W), g(coordinate_space(m));
  f.dofs() << 0, 1, 2;
  g.dofs() << 1, 2, 3, 4, 5, 6;
  auto p = std::filesystem::temp_directory_path() / "shapead_out.vtk";
  write_vtk(*m, {{"f", &f}, {"g", &g}}, p);
  std::ifstream in(p);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  CHECK(text.find("POINTS 3 double") != std::string::npos);
  CHECK(text.find("CELL_TYPES 1\n5\n") != std::string::npos);
  CHECK(text.find("SCALARS f double 1") != std::string::npos);
  CHECK(text.find("VECTORS g double\n1 4 0\n2 5 0\n3 6 0\n") != std::string::npos);
}
