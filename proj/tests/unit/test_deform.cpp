#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "shapead/deform.hpp"
#include "shapead/error.hpp"

using namespace shapead;

namespace {

void fresh_tape() { set_working_tape(std::make_shared<Tape>()); }

double asymmetry(const SparseMatrix& M) {
  const SparseMatrix D = SparseMatrix(M.transpose()) - M;
  double d = 0.0, m = 0.0;
  for (int k = 0; k < D.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(D, k); it; ++it) d = std::max(d, std::abs(it.value()));
  for (int k = 0; k < M.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(M, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return d / m;
}

double seminorm(const Eigen::VectorXd& r, const SpacePtr& W) {
  auto f = make_function(W);
  f->dofs() = r;
  return std::sqrt(assemble_scalar(inner(grad(coefficient(f)), grad(coefficient(f))) * dx(W->mesh())));
}

}  // namespace

TEST_CASE("Lame field") {
  SUBCASE("strip: linear profile") {
    auto m = rectangle_mesh(1.0, 0.1, 20, 2);
    LameField lame = solve_lame_field(m, {1}, {2});
    for (int i = 0; i < m->num_vertices(); ++i) {
      CHECK(std::abs(lame.mu->dofs()[i] - (1.0 + 499.0 * m->vertices()[i][0])) <= 1e-10);
    }
    CHECK(lame.lambda == 0.0);
  }
  SUBCASE("equal values give a constant") {
    auto m = rectangle_mesh(1.0, 1.0, 4, 4);
    LameField lame = solve_lame_field(m, {1, 3}, {2, 4}, 1.0, 1.0);
    CHECK((lame.mu->dofs().array() - 1.0).abs().maxCoeff() <= 1e-12);
  }
  SUBCASE("channel: discrete maximum principle") {
    auto m = channel_mesh({0.5, 0.5}, 0.13, 48, 10);
    LameField lame = solve_lame_field(m, {1, 2, 3}, {4});
    CHECK(lame.mu->dofs().minCoeff() >= 1.0 - 1e-10);
    CHECK(lame.mu->dofs().maxCoeff() <= 500.0 + 1e-10);
  }
  SUBCASE("errors") {
    auto m = rectangle_mesh(1.0, 1.0, 2, 2);
    CHECK_THROWS_AS(solve_lame_field(m, {}, {2}), MeshError);
    CHECK_THROWS_AS(solve_lame_field(m, {1}, {9}), Error);
  }
}

TEST_CASE("Riesz maps") {
  auto m = unit_square_mesh(6);
  auto W = coordinate_space(m);
  auto mu = solve_lame_field(m, {1}, {1}).mu;
  const RieszMap l2 = RieszMap::l2(W);
  const RieszMap h1 = RieszMap::h1(W);
  const RieszMap el = RieszMap::elasticity(W, mu, 0.0, {1});
  for (const RieszMap* r : {&l2, &h1, &el}) CHECK(asymmetry(r->matrix()) <= 1e-14);

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd f(W->dim());
  for (int i = 0; i < f.size(); ++i) f[i] = u(rng);
  CHECK((l2.representation(l2.matrix() * f) - f).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(riesz_representation(h1, Eigen::VectorXd::Zero(W->dim()))->dofs().cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(l2.representation(Eigen::VectorXd::Zero(3)), Error);
  CHECK(l2.dual_norm(l2.matrix() * f) == doctest::Approx(std::sqrt(f.dot(l2.matrix() * f))).epsilon(1e-10));

  // Constrained dofs stay at zero.
  const Eigen::VectorXd r = el.representation(f);
  for (int d : el.constrained()) CHECK(r[d] == 0.0);

  // A shape gradient concentrates on the boundary; the h1 representative is smoother.
  fresh_tape();
  auto theta = make_function(W, "theta");
  move_mesh(m, theta);
  const Expr x = spatial_coordinate();
  Scalar J = assemble(exp(index(x, 0)) * sin(3 * index(x, 1)) * dx(m));
  ReducedFunctional rf(J, {Control(theta)});
  const Eigen::VectorXd g = rf.derivative()[0];
  CHECK(seminorm(h1.representation(g), W) <= seminorm(l2.representation(g), W));

  SUBCASE("boundary l2 map") {
    auto bm = extract_boundary(m);
    auto B = FunctionSpace::on_boundary(bm);
    const RieszMap bl2 = RieszMap::l2(B);
    CHECK(asymmetry(bl2.matrix()) <= 1e-14);
    Eigen::VectorXd hb(B->dim());
    for (int i = 0; i < hb.size(); ++i) hb[i] = u(rng);
    CHECK((bl2.representation(bl2.matrix() * hb) - hb).cwiseAbs().maxCoeff() <= 1e-10);
    // Constant field: M 1 integrates to the perimeter per component.
    CHECK((bl2.matrix() * Eigen::VectorXd::Ones(B->dim())).sum() == doctest::Approx(8.0).epsilon(1e-14));
  }
}

TEST_CASE("elasticity extension") {
  fresh_tape();
  auto m = channel_mesh({0.5, 0.5}, 0.13, 32, 6);
  auto W = coordinate_space(m);
  LameField lame = solve_lame_field(m, {1, 2, 3}, {4});
  auto h = make_function(W, "h");
  auto s0 = elasticity_extend(m, h, lame, {1, 2, 3}, 4);
  CHECK(s0->dofs().cwiseAbs().maxCoeff() == 0.0);

  const Expr x = spatial_coordinate();
  interpolate(as_vector({index(x, 1) - 0.5, sin(7 * index(x, 0))}), *h);
  auto s1 = elasticity_extend(m, h, lame, {1, 2, 3}, 4);
  auto h2 = make_function(W);
  h2->dofs() = 2.0 * h->dofs();
  auto s2 = elasticity_extend(m, h2, lame, {1, 2, 3}, 4);
  CHECK((s2->dofs() - 2.0 * s1->dofs()).cwiseAbs().maxCoeff() <= 1e-12 * s1->dofs().cwiseAbs().maxCoeff());
  CHECK(s1->dofs().allFinite());
  CHECK(s1->dofs().norm() > 0.0);
  CHECK_THROWS_AS(elasticity_extend(m, h, lame, {}, 4), SolverError);
}

TEST_CASE("gradient through the deformation scheme") {
  fresh_tape();
  auto m = channel_mesh({0.5, 0.5}, 0.13, 32, 6);
  auto bm = extract_boundary(m);
  auto hb = make_function(FunctionSpace::on_boundary(bm), "h");
  auto W = coordinate_space(m);
  LameField lame = solve_lame_field(m, {1, 2, 3}, {4});
  auto h = make_function(W, "h_full");
  transfer_from_boundary(hb, h);
  auto s = elasticity_extend(m, h, lame, {1, 2, 3}, 4);
  move_mesh(m, s);
  const Expr x = spatial_coordinate();
  Scalar J = assemble(pow(index(x, 0) - 0.3, 2) * exp(index(x, 1)) * dx(m));
  ReducedFunctional rf(J, {Control(hb)});

  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  ControlValues d{Eigen::VectorXd(hb->space()->dim())};
  for (int i = 0; i < d[0].size(); ++i) d[0][i] = u(rng);
  const ControlValues m0 = rf.control_values();
  const double eps = 1e-4;
  const double fd = (rf(axpy(eps, d, m0)) - rf(axpy(-eps, d, m0))) / (2 * eps);
  rf(m0);
  const double ad = pairing(rf.derivative(), d);
  CHECK(std::abs(ad - fd) <= 1e-5 * std::abs(fd));
}

TEST_CASE("descent on a convex quadratic") {
  fresh_tape();
  auto m = unit_square_mesh(4);
  auto V = FunctionSpace::create(m, {1, 0});
  auto theta = make_function(V, "theta");
  auto target = make_function(V, "target");
  const Expr x = spatial_coordinate();
  interpolate(sin(3 * index(x, 0)) + index(x, 1), *target);
  auto diff = make_function(V);
  assign(diff, {{1.0, theta}, {-1.0, target}});
  Scalar J = assemble(coefficient(diff) * coefficient(diff) * dx(m));
  ReducedFunctional rf(J, {Control(theta)});

  const auto csv = std::filesystem::temp_directory_path() / "shapead_descent_trace.csv";
  DescentOptions opts;
  opts.max_iter = 50;
  opts.csv = csv;
  DescentResult res = optimize_descent(rf, RieszMap::l2(V), opts);
  CHECK((res.controls[0] - target->dofs()).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(res.trace.size() <= 51);
  for (std::size_t k = 1; k < res.trace.size(); ++k) CHECK(res.trace[k].J <= res.trace[k - 1].J);

  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "iter,J,grad_norm,step,min_quality");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == static_cast<int>(res.trace.size()));
  std::filesystem::remove(csv);
}

TEST_CASE("descent rejects steps that would invert cells") {
  fresh_tape();
  auto m = unit_square_mesh(3);
  auto W = coordinate_space(m);
  auto theta = make_function(W, "theta");
  move_mesh(m, theta);
  const Expr x = spatial_coordinate();
  Scalar J = assemble(index(x, 0) * index(x, 0) * dx(m));
  ReducedFunctional rf(J, {Control(theta)});
  DescentOptions opts;
  opts.max_iter = 5;
  opts.initial_norm = 20.0;  // first trial folds the mesh
  opts.mesh = m;
  DescentResult res = optimize_descent(rf, RieszMap::l2(W), opts);
  CHECK(res.rejected_quality > 0);
  for (const auto& it : res.trace) CHECK(it.min_quality >= 0.1);
  CHECK(m->min_quality() >= 0.1);
  CHECK(res.trace.back().J < res.trace.front().J);
}
