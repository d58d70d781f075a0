#pragma once

#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "shapead/space.hpp"

namespace shapead {

/// Node kinds of the expression language. Grad and Div only ever wrap an Argument or a
/// Coefficient; the builders push derivatives of compound expressions down to terminals.
enum class Op : std::uint8_t {
  Argument,
  Coefficient,
  SpatialCoordinate,
  Constant,
  FacetNormal,
  Identity,
  Zero,
  Grad,
  Div,
  Add,
  Sub,
  Mul,
  Divide,
  Inner,
  Dot,
  Outer,
  Power,
  Sin,
  Cos,
  Exp,
  Ln,
  Sqrt,
  Det,
  Transpose,
  Trace,
  Indexed,
  ListTensor,
};

class Expr;

struct Node {
  Op op;
  int rank = 0;  // 0 scalar, 1 vector, 2 matrix; -1 for a whole mixed argument/coefficient
  std::vector<Expr> children;
  double value = 0.0;  // Constant
  int index = -1;      // Argument number, Indexed component
  int sub = -1;        // component of a mixed space (-1: whole space)
  SpacePtr space;      // Argument
  FunctionPtr function;  // Coefficient
};

/// Immutable, shared expression handle.
class Expr {
 public:
  Expr() = default;
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  Expr(double value);  // NOLINT: implicit scalar constants read naturally in forms

  const Node& node() const { return *node_; }
  const Node* get() const { return node_.get(); }
  Op op() const { return node_->op; }
  int rank() const { return node_->rank; }
  bool valid() const { return node_ != nullptr; }
  bool is_zero() const { return node_->op == Op::Zero || (node_->op == Op::Constant && node_->value == 0.0); }
  bool is_constant(double v) const { return node_->op == Op::Constant && node_->value == v; }

  /// Component access: vector -> scalar, matrix -> row vector.
  Expr operator[](int i) const;
  /// Component `k` of a whole argument/coefficient on a mixed space.
  Expr sub(int k) const;

 private:
  std::shared_ptr<const Node> node_;
};

// Terminals.
Expr TestFunction(SpacePtr space);
Expr TrialFunction(SpacePtr space);
std::vector<Expr> TestFunctions(SpacePtr space);
std::vector<Expr> TrialFunctions(SpacePtr space);
Expr argument(int number, SpacePtr space, int sub = -1);
Expr coefficient(FunctionPtr f, int sub = -1);
std::vector<Expr> split(FunctionPtr f);
Expr spatial_coordinate();
Expr constant(double value);
Expr facet_normal();
Expr identity();
Expr zero(int rank = 0);
Expr as_vector(std::initializer_list<Expr> items);
Expr as_vector(const std::vector<Expr>& items);
Expr as_matrix(std::initializer_list<std::initializer_list<Expr>> rows);

// Operators.
Expr grad(const Expr& e);
Expr div(const Expr& e);
Expr inner(const Expr& a, const Expr& b);
Expr dot(const Expr& a, const Expr& b);
Expr outer(const Expr& a, const Expr& b);
Expr pow(const Expr& a, const Expr& b);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);
Expr ln(const Expr& a);
Expr sqrt(const Expr& a);
Expr det(const Expr& a);
Expr transpose(const Expr& a);
Expr tr(const Expr& a);
Expr sym(const Expr& a);
Expr index(const Expr& a, int i);

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);

/// True when the expression has no Argument, Coefficient or SpatialCoordinate terminal.
bool is_spatially_constant(const Expr& e);
bool depends_on_spatial_coordinate(const Expr& e);
/// Distinct coefficient functions, ordered by function id.
std::vector<FunctionPtr> coefficients(const Expr& e);
/// Argument numbers present in `e`.
std::vector<int> argument_numbers(const Expr& e);

/// Deterministic, fully parenthesized text.
std::string to_string(const Expr& e);

/// Polynomial degree estimate on affine cells (Grad lowers by one, non-polynomial
/// functions of a non-constant argument add one to its degree), capped at 8.
int estimate_degree(const Expr& e);

}  // namespace shapead
