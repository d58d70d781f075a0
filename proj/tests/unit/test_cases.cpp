#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "shapead/cases.hpp"
#include "shapead/error.hpp"

using namespace shapead;

namespace {

// Unit square split along (0,0)-(1,1); hole tag 2 on the bottom edge, tag 1 elsewhere.
std::shared_ptr<Mesh> two_cell_square() {
  std::map<EdgeKey, int> markers{{make_edge(0, 1), 2}, {make_edge(1, 2), 1}, {make_edge(2, 3), 1}, {make_edge(3, 0), 1}};
  return std::make_shared<Mesh>(std::vector<Point>{{0, 0}, {1, 0}, {1, 1}, {0, 1}},
                                std::vector<CellVertices>{{0, 1, 2}, {0, 2, 3}}, markers);
}

TubeConfig small_tube(TubeVariant v) {
  TubeConfig c;
  c.variant = v;
  c.n_angular = 16;
  c.n_radial = 4;
  c.T = 0.03;
  c.dt = 0.01;
  return c;
}

double dot_on(const ControlValues& a, const ControlValues& b, const std::vector<int>& idx) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (int i : idx) s += a[k][i] * b[k][i];
  return s;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SHAPEAD_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("tube: one step on two cells") {
  // omega = k = 0: the step is an L2 projection with u = 1 on the bottom edge. Free values
  // solve [4 1; 1 2] u = [-3; -1] (mass / (A/12)), so u2 = -5/7, u3 = -1/7 and
  // int |grad u|^2 = 72/49 + 40/49 = 16/7.
  for (auto variant : {TubeVariant::Frozen, TubeVariant::Decomposed}) {
    TubeConfig c;
    c.variant = variant;
    c.mesh = two_cell_square();
    c.k = 0.0;
    c.omega = 0.0;
    c.dt = 0.1;
    c.T = 0.1;
    TubeModel m = record_tube(c);
    CHECK(m.J.value() == doctest::Approx(16.0 / 7.0 * 0.1).epsilon(1e-13));
    CHECK(m.u->dofs()[2] == doctest::Approx(-5.0 / 7.0).epsilon(1e-13));
    CHECK(m.u->dofs()[3] == doctest::Approx(-1.0 / 7.0).epsilon(1e-13));
  }
}

TEST_CASE("tube: frozen and decomposed share J but not the gradient") {
  // The gradients differ by the sensitivity of the rotation solve, which grows with omega T.
  TubeConfig c = small_tube(TubeVariant::Frozen);
  c.T = 0.3;
  TubeModel fr = record_tube(c);
  const double Jf = fr.J.value();
  const ControlValues gf = fr.rf->derivative();
  c.variant = TubeVariant::Decomposed;
  TubeModel de = record_tube(c);
  const double Jd = de.J.value();
  const ControlValues gd = de.rf->derivative();
  CHECK(std::abs(Jf - Jd) <= 1e-12 * std::abs(Jf));

  std::vector<int> hole;
  const int nv = fr.mesh->num_vertices();
  for (const auto& [e, tag] : fr.mesh->facet_markers()) {
    if (tag != 2) continue;
    for (int v : {e.first, e.second}) {
      hole.push_back(v);
      hole.push_back(nv + v);
    }
  }
  std::sort(hole.begin(), hole.end());
  hole.erase(std::unique(hole.begin(), hole.end()), hole.end());
  REQUIRE(!hole.empty());
  const double cs = dot_on(gf, gd, hole) / std::sqrt(dot_on(gf, gf, hole) * dot_on(gd, gd, hole));
  const double angle = std::acos(std::clamp(cs, -1.0, 1.0)) * 180.0 / std::numbers::pi;
  CHECK(angle > 5.0);
}

TEST_CASE("tube: Taylor rates on a coarse mesh") {
  for (auto variant : {TubeVariant::Frozen, TubeVariant::Decomposed}) {
    TubeModel m = record_tube(small_tube(variant));
    const TaylorResult r =
        taylor_test(*m.rf, m.rf->control_values(), tube_test_directions(m), 1e-3, 3, true);
    CHECK(taylor_rates_ok(r));
  }
}

TEST_CASE("tube: config errors") {
  TubeConfig c = small_tube(TubeVariant::Frozen);
  c.dt = 0.0;
  CHECK_THROWS_AS(record_tube(c), Error);
  c = small_tube(TubeVariant::Frozen);
  c.T = 0.5 * c.dt;
  CHECK_THROWS_AS(record_tube(c), Error);
  c = small_tube(TubeVariant::Frozen);
  c.k = -1.0;
  CHECK_THROWS_AS(record_tube(c), Error);
  CHECK_THROWS_AS(parse_tube_variant("frozen2"), Error);
}

TEST_CASE("pironneau: geometry and value") {
  PironneauConfig c;
  c.n_angular = 32;
  c.n_radial = 8;
  PironneauModel m = record_pironneau(c, PironneauPipeline::RieszDescent);
  // Obstacle vertices come first, counter-clockwise.
  double polygon = 0.0;
  for (int j = 0; j < c.n_angular; ++j) {
    const Point& a = m.mesh->vertices()[j];
    const Point& b = m.mesh->vertices()[(j + 1) % c.n_angular];
    polygon += 0.5 * (a[0] * b[1] - b[0] * a[1]);
  }
  polygon = std::abs(polygon);
  CHECK(m.initial.volume == doctest::Approx(polygon).epsilon(1e-10));
  CHECK(std::abs(m.initial.barycenter[0] - 0.5) <= 1e-10);
  CHECK(std::abs(m.initial.barycenter[1] - 0.5) <= 1e-10);
  // Reference value 24.3019 (different mesh); penalties vanish at the reference shape.
  CHECK(std::abs(m.J.value() - 24.3019) <= 0.1 * 24.3019);
  CHECK(m.J.value() == doctest::Approx(m.J_flow.value()).epsilon(1e-14));

  PironneauConfig bad = c;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(record_pironneau(bad, PironneauPipeline::RieszDescent), Error);
}

TEST_CASE("pironneau: through-deformation gradient vs finite differences") {
  PironneauConfig c;
  c.n_angular = 24;
  c.n_radial = 6;
  PironneauModel m = record_pironneau(c, PironneauPipeline::ThroughDeformation);
  ReducedFunctional& rf = *m.rf;
  const ControlValues h = rf.control_values();
  const ControlValues d = pironneau_smooth_directions(m, 7);
  const double dJ = rf.derivative()[0].dot(d[0]);
  const double eps = 1e-2;
  const double Jp = rf({h[0] + eps * d[0]});
  const double Jm = rf({h[0] - eps * d[0]});
  const double fd = (Jp - Jm) / (2 * eps);
  CHECK(std::abs(dJ - fd) <= 1e-5 * std::max(std::abs(fd), 1e-3));

  // Only obstacle dofs move: outer-boundary entries of a direction are zero.
  const RieszMap M = pironneau_riesz(m);
  for (int i : M.constrained()) CHECK(d[0][i] == 0.0);
}

TEST_CASE("reports") {
  TaylorResult t;
  t.h = {1.0, 0.5, 0.25};
  t.R0 = t.R1 = t.R2 = {1, 1, 1};
  t.rate0 = {1.0, 1.3};
  t.rate1 = {2.0, 2.0};
  t.rate2 = {3.0, std::nan("")};
  auto rep = taylor_report(t);
  CHECK_FALSE(rep["rates_ok"].get<bool>());
  CHECK(rep["failing_rows"] == nlohmann::json::array({2}));
  CHECK(rep["rate2"][1].is_null());

  t.rate2 = {3.0, 3.1};
  CHECK_FALSE(taylor_rates_ok(t));
  CHECK(taylor_rates_ok(t, kPironneauRateBands));
  t.second_order = false;
  t.rate2 = {std::nan(""), std::nan("")};
  CHECK_FALSE(taylor_rates_ok(t));
  t.rate0 = {1.0, 1.1};
  CHECK(taylor_rates_ok(t));

  CHECK(to_string(parse_pironneau_pipeline("riesz-descent")) == "riesz-descent");
  CHECK(to_string(parse_riesz_kind("elasticity")) == "elasticity");
  CHECK_THROWS_AS(parse_riesz_kind("h2"), Error);
  CHECK_THROWS_AS(parse_pironneau_pipeline("newton"), Error);

  PironneauConfig c;
  const auto mr = mesh_report(*channel_mesh(c.center, c.radius, 32, 8, c.grading));
  CHECK(mr["schema"] == kReportSchema);
  CHECK(mr["facets_per_tag"]["4"] == 32);
  CHECK(mr["area"].get<double>() < 1.0);
}

TEST_CASE("cli") {
  const auto dir = std::filesystem::temp_directory_path() / "shapead_cli_test";
  std::filesystem::create_directories(dir);
  const std::string base = "run --case tube --mode gradient --T 0.02 --dt 0.01 --n-angular 16 --n-radial 4 --no-timings";
  REQUIRE(run_cli(base + " --out " + (dir / "a.json").string()) == 0);
  REQUIRE(run_cli(base + " --out " + (dir / "b.json").string()) == 0);
  const std::string a = read_file(dir / "a.json");
  CHECK(!a.empty());
  CHECK(a == read_file(dir / "b.json"));
  const auto rep = nlohmann::json::parse(a);
  CHECK(rep["case"] == "tube");
  CHECK_FALSE(rep.contains("timings"));
  CHECK(rep["gradient_norms"].size() == 3);

  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);
  CHECK(run_cli("run --case cube") == 2);
  CHECK(run_cli("taylor --halvings 0") == 2);
  {
    std::ofstream f(dir / "bad.msh");
    f << "$MeshFormat\n9 0 8\n$EndMeshFormat\n";
  }
  CHECK(run_cli("mesh-info " + (dir / "bad.msh").string()) == 2);
  CHECK(run_cli("mesh-info builtin:channel --out " + (dir / "m.json").string()) == 0);
  CHECK(run_cli("optimize --case tube") == 2);
  // A step far below round-off: every rate is NaN, so verification fails.
  CHECK(run_cli("taylor --case tube --T 0.01 --dt 0.01 --n-angular 16 --n-radial 4 --h0 1e-14 --halvings 1") == 1);
  std::filesystem::remove_all(dir);
}
