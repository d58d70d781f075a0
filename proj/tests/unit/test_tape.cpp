#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "shapead/error.hpp"
#include "shapead/reduced.hpp"

using namespace shapead;

namespace {

std::shared_ptr<Mesh> unit_triangle() {
  return std::make_shared<Mesh>(std::vector<Point>{{0, 0}, {1, 0}, {0, 1}}, std::vector<CellVertices>{{0, 1, 2}},
                                std::map<EdgeKey, int>{{{0, 1}, 1}, {{1, 2}, 1}, {{0, 2}, 1}});
}

void fresh_tape() { set_working_tape(std::make_shared<Tape>()); }

Eigen::VectorXd random_vector(int n, std::mt19937& rng, double scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * u(rng);
  return v;
}

ControlValues random_directions(const ReducedFunctional& rf, std::mt19937& rng, double scale) {
  ControlValues d;
  for (const auto& c : rf.controls()) d.push_back(random_vector(c.function()->space()->dim(), rng, scale));
  return d;
}

double central_fd(ReducedFunctional& rf, const ControlValues& m, const ControlValues& d, double eps) {
  const double jp = rf(axpy(eps, d, m));
  const double jm = rf(axpy(-eps, d, m));
  rf(m);
  return (jp - jm) / (2 * eps);
}

// Moving-domain chain exercising every block type: mesh move, linear solve with an
// x-dependent bc, Newton solve, assign, assembles and scalar arithmetic.
struct Chain {
  std::shared_ptr<Mesh> mesh = unit_square_mesh(4);
  SpacePtr V = FunctionSpace::create(mesh, {1, 0});
  SpacePtr W = coordinate_space(mesh);
  FunctionPtr theta = make_function(W, "theta");
  FunctionPtr f = make_function(V, "f");
  FunctionPtr u = make_function(V, "u");
  FunctionPtr w = make_function(V, "w");
  FunctionPtr z = make_function(V, "z");
  Scalar J;

  Chain() {
    fresh_tape();
    const Expr x = spatial_coordinate();
    interpolate(as_vector({0.05 * sin(std::numbers::pi * index(x, 1)), constant(0.03) * index(x, 0)}), *theta);
    interpolate(constant(1.0) + index(x, 0) * index(x, 1), *f);
    move_mesh(mesh, theta);

    const Expr uu = TrialFunction(V), v = TestFunction(V);
    const Expr g = index(x, 0) * index(x, 0) + sin(index(x, 1));
    solve_linear(inner(grad(uu), grad(v)) * dx(mesh) + uu * v * dx(mesh), coefficient(f) * v * dx(mesh), u,
                 {DirichletBC(V, g, 1)});

    const Expr wc = coefficient(w);
    const Form F = (wc + wc * wc * wc - coefficient(u)) * v * dx(mesh);
    solve_newton(F, w);
    assign(z, {{2.0, w}, {-1.0, u}});

    Scalar J1 = assemble(coefficient(z) * coefficient(z) * dx(mesh) +
                         inner(grad(coefficient(u)), grad(coefficient(u))) * dx(mesh));
    Scalar J2 = assemble(coefficient(u) * index(x, 0) * dx(mesh));
    J = J1 * J2 / (J1 + 3.0);
  }
};

}  // namespace

TEST_CASE("area of a scaled triangle") {
  fresh_tape();
  auto m = unit_triangle();
  auto theta = make_function(coordinate_space(m), "theta");
  const double eps = 0.1;
  const std::vector<double> X = m->coordinates();
  theta->dofs() = eps * Eigen::Map<const Eigen::VectorXd>(X.data(), 6);
  move_mesh(m, theta);
  Scalar J = assemble(constant(1.0) * dx(m));
  CHECK(J.value() == doctest::Approx(0.5 * (1 + eps) * (1 + eps)).epsilon(1e-15));

  ReducedFunctional rf(J, {Control(theta)});
  // Direction: the reference coordinates, so theta = (eps + s) X and J(s) = 0.5 (1 + eps + s)^2.
  const ControlValues d{Eigen::VectorXd(theta->dofs() / eps)};
  CHECK(pairing(rf.derivative(), d) == doctest::Approx(1 + eps).epsilon(1e-14));
  CHECK(rf.tlm(d) == doctest::Approx(1 + eps).epsilon(1e-14));
  CHECK(pairing(rf.hessian(d), d) == doctest::Approx(1.0).epsilon(1e-14));

  // Quadratic functional: the second-order Taylor remainder is round-off.
  TaylorResult t = taylor_test(rf, rf.control_values(), d, 0.1, 3);
  for (double r : t.R2) CHECK(r < 1e-14);
  CHECK(t.min_rate(1) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("shape gradient equals the integral of div V") {
  fresh_tape();
  auto m = unit_square_mesh(6);
  auto W = coordinate_space(m);
  auto theta = make_function(W, "theta");
  move_mesh(m, theta);
  Scalar J = assemble(constant(1.0) * dx(m));
  ReducedFunctional rf(J, {Control(theta)});
  const ControlValues g = rf.derivative();

  const Expr x = spatial_coordinate();
  auto V = make_function(W);
  interpolate(as_vector({index(x, 0) * index(x, 1), sin(index(x, 0) + 2 * index(x, 1))}), *V);
  CHECK(pairing(g, {V->dofs()}) == doctest::Approx(assemble_scalar(div(coefficient(V)) * dx(m))).epsilon(1e-13));
}

TEST_CASE("moving-domain chain: adjoint, tlm, Hessian and Taylor rates") {
  Chain c;
  ReducedFunctional rf(c.J, {Control(c.theta), Control(c.f)});
  const ControlValues m = rf.control_values();
  std::mt19937 rng(7);

  SUBCASE("replay reproduces the recorded value") {
    const double J0 = c.J.value();
    const double a = rf(m);
    const double b = rf(m);
    CHECK(a == b);
    CHECK(std::abs(a - J0) <= 1e-13 * std::abs(J0));
  }

  SUBCASE("adjoint agrees with tlm") {
    const ControlValues g = rf.derivative();
    for (int k = 0; k < 4; ++k) {
      const ControlValues d = random_directions(rf, rng, 0.05);
      const double t = rf.tlm(d);
      CHECK(std::abs(pairing(g, d) - t) <= 1e-12 * std::max(1.0, std::abs(t)));
    }
  }

  SUBCASE("gradient agrees with central differences") {
    const ControlValues g = rf.derivative();
    const ControlValues d = random_directions(rf, rng, 0.05);
    const double fd = central_fd(rf, m, d, 1e-5);
    CHECK(std::abs(pairing(g, d) - fd) <= 1e-7 * std::abs(fd));
  }

  SUBCASE("Hessian action agrees with differences of gradients") {
    const ControlValues d = random_directions(rf, rng, 0.05);
    const ControlValues Hd = rf.hessian(d);
    const double eps = 1e-5;
    rf(axpy(eps, d, m));
    const ControlValues gp = rf.derivative();
    rf(axpy(-eps, d, m));
    const ControlValues gm = rf.derivative();
    rf(m);
    const ControlValues e = random_directions(rf, rng, 1.0);
    const double fd = (pairing(gp, e) - pairing(gm, e)) / (2 * eps);
    CHECK(std::abs(pairing(Hd, e) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }

  SUBCASE("Hessian is symmetric") {
    const ControlValues d1 = random_directions(rf, rng, 0.05);
    const ControlValues d2 = random_directions(rf, rng, 0.05);
    const double a = pairing(rf.hessian(d1), d2);
    const double b = pairing(rf.hessian(d2), d1);
    CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
  }

  SUBCASE("tlm is linear and vanishes on the zero direction") {
    const ControlValues d1 = random_directions(rf, rng, 0.05);
    const ControlValues d2 = random_directions(rf, rng, 0.05);
    const double t1 = rf.tlm(d1), t2 = rf.tlm(d2);
    const double t12 = rf.tlm(axpy(-3.0, d2, d1));
    CHECK(std::abs(t12 - (t1 - 3 * t2)) <= 1e-12 * std::max(1.0, std::abs(t12)));
    CHECK(rf.tlm(rf.zero_directions()) == 0.0);
    for (const auto& v : rf.hessian(rf.zero_directions())) CHECK(v.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("Taylor remainders converge at orders 1, 2, 3") {
    const ControlValues d = random_directions(rf, rng, 0.05);
    TaylorResult t = taylor_test(rf, m, d, 0.5, 4);
    CHECK(t.min_rate(0) > 0.9);
    CHECK(t.min_rate(1) > 1.9);
    CHECK(t.min_rate(2) > 2.8);
    CHECK(rf(m) == doctest::Approx(c.J.value()).epsilon(1e-13));
  }
}

TEST_CASE("boundary transfer and scaling blocks") {
  fresh_tape();
  auto m = unit_square_mesh(5);
  auto bmesh = extract_boundary(m);
  auto h = make_function(FunctionSpace::on_boundary(bmesh), "h");
  auto theta = make_function(coordinate_space(m), "theta");
  transfer_from_boundary(h, theta);
  move_mesh(m, theta);
  const Expr x = spatial_coordinate();
  Scalar A = assemble(constant(1.0) * dx(m));
  Scalar M = assemble(index(x, 0) * index(x, 0) * exp(index(x, 1)) * dx(m));
  Scalar J = (M - 0.5 * A) * (M - 0.5 * A) + 2.0 * M / A;
  ReducedFunctional rf(J, {Control(h)});

  std::mt19937 rng(3);
  const ControlValues m0 = rf.control_values();
  const ControlValues d = random_directions(rf, rng, 0.1);
  const ControlValues g = rf.derivative();
  CHECK(std::abs(pairing(g, d) - rf.tlm(d)) <= 1e-13);
  TaylorResult t = taylor_test(rf, m0, d, 0.2, 4);
  CHECK(t.min_rate(1) > 1.9);
  CHECK(t.min_rate(2) > 2.8);
}

TEST_CASE("annotation control") {
  fresh_tape();
  auto m = unit_triangle();
  auto V = FunctionSpace::create(m, {1, 0});
  auto a = make_function(V, "a");
  auto b = make_function(V, "b");
  a->dofs().setOnes();
  assign(b, {{2.0, a}});
  CHECK(working_tape().num_blocks() == 1);
  {
    StopAnnotating stop;
    assign(b, {{3.0, a}});
    assemble(coefficient(b) * dx(m));
  }
  CHECK(working_tape().num_blocks() == 1);
  pause_annotation();
  assign(a, {{2.0, b}});
  continue_annotation();
  CHECK(working_tape().num_blocks() == 1);

  // b was overwritten off the tape, so it starts a new root and the recorded a -> b
  // dependence no longer reaches J.
  Scalar J = assemble(coefficient(b) * dx(m));
  CHECK(J.value() == doctest::Approx(1.5));
  std::vector<std::string> warnings;
  auto old = set_warning_handler([&](std::string_view s) { warnings.emplace_back(s); });
  ReducedFunctional rf(J, {Control(a)});
  set_warning_handler(old);
  CHECK(warnings.size() == 1);
  CHECK(rf.derivative()[0].cwiseAbs().maxCoeff() == 0.0);

  // Outputs of recorded operations cannot be controls.
  auto c = make_function(V, "c");
  assign(c, a);
  CHECK_THROWS_AS(Control{c}, TapeError);
}

TEST_CASE("facet functionals on a moving mesh have no shape derivative") {
  fresh_tape();
  auto m = unit_square_mesh(2);
  auto theta = make_function(coordinate_space(m), "theta");
  move_mesh(m, theta);
  Scalar J = assemble(constant(1.0) * ds(m));
  ReducedFunctional rf(J, {Control(theta)});
  CHECK_THROWS_AS(rf.derivative(), FormError);
  CHECK(rf(rf.control_values()) == doctest::Approx(4.0));
}

TEST_CASE("solve rejects the unknown as a coefficient") {
  fresh_tape();
  auto m = unit_triangle();
  auto V = FunctionSpace::create(m, {1, 0});
  auto u = make_function(V);
  const Expr uu = TrialFunction(V), v = TestFunction(V);
  CHECK_THROWS_AS(solve_linear(uu * v * dx(m), coefficient(u) * v * dx(m), u), TapeError);
}
