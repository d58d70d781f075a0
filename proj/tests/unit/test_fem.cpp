#include <cmath>
#include <numbers>

#include "doctest.h"
#include "shapead/error.hpp"
#include "shapead/quadrature.hpp"
#include "shapead/solve.hpp"

using namespace shapead;

namespace {

std::shared_ptr<Mesh> unit_triangle() {
  return std::make_shared<Mesh>(std::vector<Point>{{0, 0}, {1, 0}, {0, 1}}, std::vector<CellVertices>{{0, 1, 2}},
                                std::map<EdgeKey, int>{{{0, 1}, 1}, {{1, 2}, 1}, {{0, 2}, 1}});
}

double max_abs(const SparseMatrix& A) {
  double m = 0.0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

}  // namespace

TEST_CASE("quadrature rules integrate monomials exactly") {
  for (int deg = 0; deg <= kMaxQuadratureDegree; ++deg) {
    const auto& rule = triangle_rule(deg);
    for (int a = 0; a <= deg; ++a) {
      for (int b = 0; a + b <= deg; ++b) {
        double s = 0.0;
        for (std::size_t q = 0; q < rule.points.size(); ++q)
          s += rule.weights[q] * std::pow(rule.points[q][0], a) * std::pow(rule.points[q][1], b);
        const double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
        CHECK(std::abs(s - exact) <= 1e-15);
      }
    }
    const auto& line = line_rule(deg);
    for (int a = 0; a <= deg; ++a) {
      double s = 0.0;
      for (std::size_t q = 0; q < line.points.size(); ++q) s += line.weights[q] * std::pow(line.points[q], a);
      CHECK(std::abs(s - 1.0 / (a + 1)) <= 1e-15);
    }
  }
  CHECK_THROWS_AS(triangle_rule(9), AssemblyError);
}

TEST_CASE("single-triangle matrices") {
  auto m = unit_triangle();
  auto V = FunctionSpace::create(m, {1, 0});
  const Expr u = TrialFunction(V), v = TestFunction(V);
  CHECK(assemble_scalar(constant(1.0) * dx(m)) == 0.5);

  const Eigen::MatrixXd M = assemble_matrix(u * v * dx(m));
  Eigen::MatrixXd Mref(3, 3);
  Mref << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  Mref /= 24.0;
  CHECK((M - Mref).cwiseAbs().maxCoeff() <= 1e-14);

  const Eigen::MatrixXd K = assemble_matrix(inner(grad(u), grad(v)) * dx(m));
  Eigen::MatrixXd Kref(3, 3);
  Kref << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
  CHECK((K - Kref).cwiseAbs().maxCoeff() <= 1e-14);

  CHECK_THROWS_AS(assemble_scalar(spatial_coordinate()[0] * dx(m).with_degree(9)), AssemblyError);
}

TEST_CASE("facet integrals") {
  auto m = unit_triangle();
  const Expr x = spatial_coordinate();
  CHECK(assemble_scalar(constant(1.0) * ds(m)) == doctest::Approx(2.0 + std::sqrt(2.0)).epsilon(1e-15));
  // Divergence theorem: int div(x) dx = int x.n ds.
  CHECK(assemble_scalar(dot(x, facet_normal()) * ds(m)) == doctest::Approx(1.0).epsilon(1e-14));
  auto rect = rectangle_mesh(2.0, 1.0, 4, 3);
  CHECK(assemble_scalar(x[1] * ds(rect)(2)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(assemble_scalar(facet_normal()[0] * ds(rect)(1)) == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("assembly invariants") {
  auto m = annulus_mesh(1.0, 0.3, {0.2, 0.1}, 24, 6);
  auto V = FunctionSpace::create(m, {2, 0});
  const Expr u = TrialFunction(V), v = TestFunction(V);
  const Form a = (inner(grad(u), grad(v)) + u * v) * dx(m);
  const SparseMatrix A = assemble_matrix(a);
  CHECK(max_abs(A - SparseMatrix(A.transpose())) <= 1e-14 * max_abs(A));

  double area = 0.0;
  for (int c = 0; c < m->num_cells(); ++c) area += m->signed_area(c);
  CHECK(std::abs(assemble_scalar(constant(1.0) * dx(m)) - area) <= 1e-15 * area);

  // Raising the quadrature degree does not change polynomial integrals.
  const Form lower = (u * v) * dx(m);
  const Form higher = (u * v) * dx(m).with_degree(8);
  CHECK(max_abs(assemble_matrix(lower) - assemble_matrix(higher)) <= 1e-14 * max_abs(assemble_matrix(lower)));
}

TEST_CASE("Poisson on the unit square against a Fourier series") {
  auto m = unit_square_mesh(16);
  auto V = FunctionSpace::create(m, {1, 0});
  const Expr u = TrialFunction(V), v = TestFunction(V);
  Function sol(V);
  solve_linear_system(inner(grad(u), grad(v)) * dx(m), constant(1.0) * v * dx(m), {DirichletBC(V, 0.0, 1)}, sol);
  double oracle = 0.0;
  for (int i = 1; i < 400; i += 2)
    for (int j = 1; j < 400; j += 2)
      oracle += 16.0 / (std::pow(std::numbers::pi, 4) * i * j * (i * i + j * j)) * std::sin(i * std::numbers::pi / 2) *
                std::sin(j * std::numbers::pi / 2);
  CHECK(oracle == doctest::Approx(0.0736713).epsilon(1e-5));
  int center = -1;
  for (int k = 0; k < m->num_vertices(); ++k)
    if (std::abs(m->vertices()[k][0] - 0.5) < 1e-12 && std::abs(m->vertices()[k][1] - 0.5) < 1e-12) center = k;
  REQUIRE(center >= 0);
  CHECK(std::abs(sol.dofs()[center] - oracle) <= 2e-3);
}

TEST_CASE("projection and Dirichlet rows") {
  auto m = annulus_mesh(1.0, 0.3, {0.2, 0.1}, 16, 4);
  auto V = FunctionSpace::create(m, {2, 0});
  const Expr u = TrialFunction(V), v = TestFunction(V);
  Function p(V);
  solve_linear_system(u * v * dx(m), v * dx(m), {}, p);
  CHECK((p.dofs() - Eigen::VectorXd::Ones(V->dim())).cwiseAbs().maxCoeff() <= 1e-10);

  auto t = unit_triangle();
  auto P = FunctionSpace::create(t, {1, 0});
  Function one(P);
  const Expr U = TrialFunction(P), W = TestFunction(P);
  solve_linear_system(inner(grad(U), grad(W)) * dx(t), W * dx(t), {DirichletBC(P, 1.0, 1)}, one);
  CHECK((one.dofs() - Eigen::VectorXd::Ones(3)).norm() <= 1e-14);

  SparseMatrix A = assemble_matrix(inner(grad(u), grad(v)) * dx(m));
  Eigen::VectorXd b = assemble_vector(v * dx(m));
  const BCs bcs = {DirichletBC(V, 3.0, 2)};
  const auto fixed = bc_dofs(bcs);
  Eigen::VectorXd hb = b;
  SparseMatrix hA = A;
  apply_dirichlet(hA, hb, bcs, BCMode::Homogenized);
  for (int i = 0; i < b.size(); ++i) {
    const bool is_fixed = std::binary_search(fixed.begin(), fixed.end(), i);
    CHECK(hb[i] == (is_fixed ? 0.0 : b[i]));
  }
  CHECK_THROWS_AS(DirichletBC(V, 1.0, 99), FormError);
  CHECK_THROWS_AS(DirichletBC(V, as_vector({1.0, 0.0}), 1), FormError);
}

TEST_CASE("Taylor-Hood Stokes is divergence free") {
  auto m = unit_square_mesh(8);
  auto TH = FunctionSpace::mixed(m, {{2, 1}, {1, 0}});
  const auto uq = TrialFunctions(TH);
  const auto vq = TestFunctions(TH);
  const Expr x = spatial_coordinate();
  // u = (x^2, -2xy), p = 0 solves -lap u + grad p = (-2, 0) and lies in the discrete space.
  const Expr exact = as_vector({x[0] * x[0], -2.0 * x[0] * x[1]});
  const Form a = (inner(grad(uq[0]), grad(vq[0])) - div(uq[0]) * vq[1] - div(vq[0]) * uq[1] +
                  1e-10 * uq[1] * vq[1]) *
                 dx(m);
  const Form L = dot(as_vector({-2.0, 0.0}), vq[0]) * dx(m);
  auto w = make_function(TH);
  solve_linear_system(a, L, {DirichletBC(TH, exact, 1, 0)}, *w);
  const auto parts = split(w);
  CHECK(assemble_scalar(div(parts[0]) * div(parts[0]) * dx(m)) <= 1e-10);
  CHECK(assemble_scalar(inner(parts[0] - exact, parts[0] - exact) * dx(m)) <= 1e-20);
}

TEST_CASE("Newton solver") {
  auto t = unit_triangle();
  auto P = FunctionSpace::create(t, {1, 0});
  auto u = make_function(P);
  u->dofs().setOnes();
  const Expr U = coefficient(u), v = TestFunction(P);
  NewtonResult r = newton_solve((U * U * U - 8.0) * v * dx(t), {}, u);
  CHECK((u->dofs() - Eigen::VectorXd::Constant(3, 2.0)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(r.iterations > 2);

  // Linear residual: one iteration.
  auto m = annulus_mesh(1.0, 0.3, {0.2, 0.1}, 16, 4);
  auto W = coordinate_space(m);
  auto th = make_function(W);
  const Expr z = TestFunction(W), X = spatial_coordinate();
  auto rot = [](const Expr& y) { return 2.0 * std::numbers::pi * 0.25 * as_vector({y[1], -y[0]}); };
  const Expr TH = coefficient(th);
  const Form Fs = (inner(TH, z) - 0.01 * 0.5 * inner(rot(X + TH) + rot(X), z)) * dx(m);
  r = newton_solve(Fs, {}, th);
  CHECK(r.iterations == 1);
  r = newton_solve(Fs, {}, th);
  CHECK(r.iterations == 0);

  auto bad = make_function(P);
  const Expr B = coefficient(bad);
  try {
    newton_solve((B * B + 1.0) * v * dx(t), {}, bad, {1e-10, 5});
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual_history().size() == 6);
  } catch (const SolverError&) {
    // A singular Jacobian at the start is also a failure to converge.
  }
}

TEST_CASE("interpolation and point evaluation") {
  auto m = annulus_mesh(1.0, 0.3, {0.2, 0.1}, 16, 4);
  auto V = FunctionSpace::create(m, {2, 0});
  Function f(V);
  const Expr x = spatial_coordinate();
  interpolate(x[0] * x[0] - 3.0 * x[0] * x[1] + 2.0, f);
  const auto& c = m->cells()[7];
  Point p{0.0, 0.0};
  for (int k = 0; k < 3; ++k) {
    p[0] += m->vertices()[c[k]][0] / 3.0;
    p[1] += m->vertices()[c[k]][1] / 3.0;
  }
  CHECK(evaluate_function(f, 7, p)[0] == doctest::Approx(p[0] * p[0] - 3.0 * p[0] * p[1] + 2.0).epsilon(1e-13));
}
