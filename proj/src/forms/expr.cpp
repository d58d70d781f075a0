#include "shapead/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "shapead/error.hpp"

namespace shapead {

namespace {

Expr make(Op op, int rank, std::vector<Expr> children = {}) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->rank = rank;
  n->children = std::move(children);
  return Expr(std::move(n));
}

const char* op_name(Op op) {
  switch (op) {
    case Op::Argument: return "Argument";
    case Op::Coefficient: return "Coefficient";
    case Op::SpatialCoordinate: return "SpatialCoordinate";
    case Op::Constant: return "Constant";
    case Op::FacetNormal: return "FacetNormal";
    case Op::Identity: return "Identity";
    case Op::Zero: return "Zero";
    case Op::Grad: return "grad";
    case Op::Div: return "div";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Divide: return "/";
    case Op::Inner: return "inner";
    case Op::Dot: return "dot";
    case Op::Outer: return "outer";
    case Op::Power: return "**";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Exp: return "exp";
    case Op::Ln: return "ln";
    case Op::Sqrt: return "sqrt";
    case Op::Det: return "det";
    case Op::Transpose: return "transpose";
    case Op::Trace: return "tr";
    case Op::Indexed: return "index";
    case Op::ListTensor: return "as_vector";
  }
  return "?";
}

[[noreturn]] void shape_error(const std::string& what) { throw FormError("shape mismatch: " + what); }

bool is_function_terminal(const Expr& e) { return e.op() == Op::Argument || e.op() == Op::Coefficient; }

void require_scalar(const Expr& e, const char* where) {
  if (e.rank() != 0) shape_error(std::string(where) + " expects a scalar operand");
}

void require_valid(const Expr& e) {
  if (!e.valid()) throw FormError("use of an empty expression");
  if (e.rank() < 0) throw FormError("a function on a mixed space must be split into components first");
}

Expr unary(Op op, const Expr& a) {
  require_valid(a);
  require_scalar(a, op_name(op));
  return make(op, 0, {a});
}

int element_rank(const SpacePtr& space, int sub) {
  if (sub < 0) return space->is_mixed() ? -1 : space->element(0).rank;
  return space->element(sub).rank;
}

}  // namespace

Expr::Expr(double value) {
  auto n = std::make_shared<Node>();
  n->op = Op::Constant;
  n->value = value;
  node_ = std::move(n);
}

Expr Expr::operator[](int i) const { return index(*this, i); }

Expr Expr::sub(int k) const {
  const Node& n = node();
  if (!is_function_terminal(*this) || n.sub >= 0) {
    throw FormError("sub() applies to a whole argument or coefficient");
  }
  if (n.op == Op::Argument) return argument(n.index, n.space, n.space->is_mixed() ? k : -1);
  return coefficient(n.function, n.function->space()->is_mixed() ? k : -1);
}

Expr argument(int number, SpacePtr space, int sub) {
  if (!space) throw FormError("argument needs a function space");
  if (space->is_boundary()) throw FormError("functions on a boundary mesh cannot appear in forms");
  if (sub >= space->num_sub()) throw FormError("sub-space index out of range");
  auto n = std::make_shared<Node>();
  n->op = Op::Argument;
  n->index = number;
  n->sub = sub;
  n->rank = element_rank(space, sub);
  n->space = std::move(space);
  return Expr(std::move(n));
}

Expr TestFunction(SpacePtr space) { return argument(0, std::move(space)); }
Expr TrialFunction(SpacePtr space) { return argument(1, std::move(space)); }

std::vector<Expr> TestFunctions(SpacePtr space) {
  std::vector<Expr> out;
  for (int k = 0; k < space->num_sub(); ++k) out.push_back(argument(0, space, space->is_mixed() ? k : -1));
  return out;
}

std::vector<Expr> TrialFunctions(SpacePtr space) {
  std::vector<Expr> out;
  for (int k = 0; k < space->num_sub(); ++k) out.push_back(argument(1, space, space->is_mixed() ? k : -1));
  return out;
}

Expr coefficient(FunctionPtr f, int sub) {
  if (!f) throw FormError("coefficient needs a function");
  const auto& space = f->space();
  if (space->is_boundary()) throw FormError("functions on a boundary mesh cannot appear in forms");
  if (sub >= space->num_sub()) throw FormError("sub-function index out of range");
  auto n = std::make_shared<Node>();
  n->op = Op::Coefficient;
  n->sub = sub;
  n->rank = element_rank(space, sub);
  n->function = std::move(f);
  return Expr(std::move(n));
}

std::vector<Expr> split(FunctionPtr f) {
  std::vector<Expr> out;
  const auto& space = f->space();
  for (int k = 0; k < space->num_sub(); ++k) out.push_back(coefficient(f, space->is_mixed() ? k : -1));
  return out;
}

Expr spatial_coordinate() { return make(Op::SpatialCoordinate, 1); }
Expr constant(double value) { return Expr(value); }
Expr facet_normal() { return make(Op::FacetNormal, 1); }
Expr identity() { return make(Op::Identity, 2); }
Expr zero(int rank) {
  if (rank < 0 || rank > 2) shape_error("zero tensor rank must be 0..2");
  return make(Op::Zero, rank);
}

Expr as_vector(const std::vector<Expr>& items) {
  if (items.size() != 2) shape_error("as_vector expects exactly two components");
  for (const auto& i : items) require_valid(i);
  const int r = items[0].rank();
  if (items[1].rank() != r || r > 1) shape_error("as_vector components must be scalars or equal-length vectors");
  if (items[0].is_zero() && items[1].is_zero()) return zero(r + 1);
  return make(Op::ListTensor, r + 1, items);
}

Expr as_vector(std::initializer_list<Expr> items) { return as_vector(std::vector<Expr>(items)); }

Expr as_matrix(std::initializer_list<std::initializer_list<Expr>> rows) {
  std::vector<Expr> r;
  for (const auto& row : rows) r.push_back(as_vector(row));
  return as_vector(r);
}

Expr index(const Expr& a, int i) {
  require_valid(a);
  if (a.rank() < 1) shape_error("cannot index a scalar");
  if (i < 0 || i > 1) shape_error("component index out of range");
  if (a.op() == Op::Zero) return zero(a.rank() - 1);
  if (a.op() == Op::ListTensor) return a.node().children[i];
  if (a.op() == Op::Identity) return as_vector({i == 0 ? 1.0 : 0.0, i == 1 ? 1.0 : 0.0});
  auto n = std::make_shared<Node>();
  n->op = Op::Indexed;
  n->rank = a.rank() - 1;
  n->index = i;
  n->children = {a};
  return Expr(std::move(n));
}

Expr operator+(const Expr& a, const Expr& b) {
  require_valid(a);
  require_valid(b);
  if (a.rank() != b.rank()) shape_error("sum of rank " + std::to_string(a.rank()) + " and rank " + std::to_string(b.rank()));
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (a.op() == Op::Constant && b.op() == Op::Constant) return constant(a.node().value + b.node().value);
  return make(Op::Add, a.rank(), {a, b});
}

Expr operator-(const Expr& a, const Expr& b) {
  require_valid(a);
  require_valid(b);
  if (a.rank() != b.rank()) shape_error("difference of rank " + std::to_string(a.rank()) + " and rank " + std::to_string(b.rank()));
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  if (a.op() == Op::Constant && b.op() == Op::Constant) return constant(a.node().value - b.node().value);
  return make(Op::Sub, a.rank(), {a, b});
}

Expr operator-(const Expr& a) {
  require_valid(a);
  if (a.op() == Op::Constant) return constant(-a.node().value);
  if (a.op() == Op::Zero) return a;
  return constant(-1.0) * a;
}

Expr operator*(const Expr& a, const Expr& b) {
  require_valid(a);
  require_valid(b);
  if (a.rank() != 0 && b.rank() != 0) shape_error("product of two non-scalars; use inner, dot or outer");
  const int r = std::max(a.rank(), b.rank());
  if (a.is_zero() || b.is_zero()) return zero(r);
  if (a.op() == Op::Constant && b.op() == Op::Constant) return constant(a.node().value * b.node().value);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  // Scalar factor first keeps printing and evaluation canonical.
  if (a.rank() != 0) return make(Op::Mul, r, {b, a});
  return make(Op::Mul, r, {a, b});
}

Expr operator/(const Expr& a, const Expr& b) {
  require_valid(a);
  require_valid(b);
  require_scalar(b, "division");
  if (b.is_zero()) throw FormError("division by zero");
  if (a.is_zero()) return zero(a.rank());
  if (b.is_constant(1.0)) return a;
  if (a.op() == Op::Constant && b.op() == Op::Constant) return constant(a.node().value / b.node().value);
  return make(Op::Divide, a.rank(), {a, b});
}

Expr inner(const Expr& a, const Expr& b) {
  require_valid(a);
  require_valid(b);
  if (a.rank() != b.rank()) shape_error("inner of rank " + std::to_string(a.rank()) + " and rank " + std::to_string(b.rank()));
  if (a.rank() == 0) return a * b;
  if (a.is_zero() || b.is_zero()) return zero(0);
  return make(Op::Inner, 0, {a, b});
}

Expr dot(const Expr& a, const Expr& b) {
  require_valid(a);
  require_valid(b);
  if (a.rank() == 0 || b.rank() == 0) return a * b;
  const int r = a.rank() + b.rank() - 2;
  if (a.is_zero() || b.is_zero()) return zero(r);
  if (a.op() == Op::Identity) return b;
  if (b.op() == Op::Identity) return a;
  return make(Op::Dot, r, {a, b});
}

Expr outer(const Expr& a, const Expr& b) {
  require_valid(a);
  require_valid(b);
  if (a.rank() == 0 || b.rank() == 0) return a * b;
  if (a.rank() + b.rank() > 2) shape_error("outer product of rank > 2");
  if (a.is_zero() || b.is_zero()) return zero(2);
  return make(Op::Outer, 2, {a, b});
}

Expr pow(const Expr& a, const Expr& b) {
  require_valid(a);
  require_valid(b);
  require_scalar(a, "pow");
  require_scalar(b, "pow");
  if (b.is_zero()) return constant(1.0);
  if (b.is_constant(1.0)) return a;
  if (a.op() == Op::Constant && b.op() == Op::Constant) return constant(std::pow(a.node().value, b.node().value));
  if (a.is_zero()) return zero(0);
  return make(Op::Power, 0, {a, b});
}

Expr sin(const Expr& a) {
  if (a.valid() && a.op() == Op::Constant) return constant(std::sin(a.node().value));
  return unary(Op::Sin, a);
}
Expr cos(const Expr& a) {
  if (a.valid() && a.op() == Op::Constant) return constant(std::cos(a.node().value));
  return unary(Op::Cos, a);
}
Expr exp(const Expr& a) {
  if (a.valid() && a.op() == Op::Constant) return constant(std::exp(a.node().value));
  return unary(Op::Exp, a);
}
Expr ln(const Expr& a) {
  if (a.valid() && a.op() == Op::Constant) return constant(std::log(a.node().value));
  return unary(Op::Ln, a);
}
Expr sqrt(const Expr& a) {
  if (a.valid() && a.op() == Op::Constant) return constant(std::sqrt(a.node().value));
  return unary(Op::Sqrt, a);
}

Expr det(const Expr& a) {
  require_valid(a);
  if (a.rank() != 2) shape_error("det expects a matrix");
  if (a.op() == Op::Zero) return zero(0);
  if (a.op() == Op::Identity) return constant(1.0);
  return make(Op::Det, 0, {a});
}

Expr transpose(const Expr& a) {
  require_valid(a);
  if (a.rank() != 2) shape_error("transpose expects a matrix");
  if (a.op() == Op::Zero || a.op() == Op::Identity) return a;
  if (a.op() == Op::Transpose) return a.node().children[0];
  return make(Op::Transpose, 2, {a});
}

Expr tr(const Expr& a) {
  require_valid(a);
  if (a.rank() != 2) shape_error("tr expects a matrix");
  if (a.op() == Op::Zero) return zero(0);
  if (a.op() == Op::Identity) return constant(2.0);
  if (a.op() == Op::Transpose) return tr(a.node().children[0]);
  return make(Op::Trace, 0, {a});
}

Expr sym(const Expr& a) { return 0.5 * (a + transpose(a)); }

bool is_spatially_constant(const Expr& e) {
  std::unordered_set<const Node*> seen;
  std::function<bool(const Expr&)> visit = [&](const Expr& x) {
    if (!seen.insert(x.get()).second) return true;
    switch (x.op()) {
      case Op::Argument:
      case Op::Coefficient:
      case Op::SpatialCoordinate:
      case Op::FacetNormal: return false;
      default: break;
    }
    for (const auto& c : x.node().children)
      if (!visit(c)) return false;
    return true;
  };
  return visit(e);
}

bool depends_on_spatial_coordinate(const Expr& e) {
  std::unordered_set<const Node*> seen;
  std::function<bool(const Expr&)> visit = [&](const Expr& x) {
    if (!seen.insert(x.get()).second) return false;
    if (x.op() == Op::SpatialCoordinate) return true;
    for (const auto& c : x.node().children)
      if (visit(c)) return true;
    return false;
  };
  return visit(e);
}

Expr grad(const Expr& e) {
  require_valid(e);
  if (e.rank() >= 2) shape_error("gradient of a matrix is not supported");
  const int r = e.rank() + 1;
  const Node& n = e.node();
  switch (e.op()) {
    case Op::Argument:
    case Op::Coefficient: return make(Op::Grad, r, {e});
    case Op::SpatialCoordinate: return identity();
    case Op::Constant:
    case Op::Zero:
    case Op::Identity: return zero(r);
    case Op::FacetNormal: throw FormError("gradient of the facet normal is not supported");
    case Op::Grad:
    case Op::Div: throw FormError("second derivatives are not supported");
    case Op::Add: return grad(n.children[0]) + grad(n.children[1]);
    case Op::Sub: return grad(n.children[0]) - grad(n.children[1]);
    case Op::Mul: {
      const Expr& a = n.children[0];  // scalar
      const Expr& b = n.children[1];
      const Expr ga = grad(a);
      return a * grad(b) + outer(b, ga);
    }
    case Op::Divide: {
      const Expr& a = n.children[0];
      const Expr& b = n.children[1];
      return grad(a) / b - outer(a, grad(b)) / (b * b);
    }
    case Op::Inner:
    case Op::Dot: {
      const Expr& a = n.children[0];
      const Expr& b = n.children[1];
      if (a.rank() == 1 && b.rank() == 1) return dot(transpose(grad(a)), b) + dot(transpose(grad(b)), a);
      if (is_spatially_constant(a) && e.op() == Op::Dot) {
        // d/dx (A b) with constant A
        if (a.rank() == 2 && b.rank() == 1) return dot(a, grad(b));
      }
      throw FormError("gradient of this contraction is not supported");
    }
    case Op::Power: {
      const Expr& a = n.children[0];
      const Expr& b = n.children[1];
      if (!is_spatially_constant(b)) throw FormError("gradient of a power with non-constant exponent");
      return b * pow(a, b - 1.0) * grad(a);
    }
    case Op::Sin: return cos(n.children[0]) * grad(n.children[0]);
    case Op::Cos: return -sin(n.children[0]) * grad(n.children[0]);
    case Op::Exp: return e * grad(n.children[0]);
    case Op::Ln: return grad(n.children[0]) / n.children[0];
    case Op::Sqrt: return grad(n.children[0]) / (2.0 * e);
    case Op::Indexed: {
      const Expr& a = n.children[0];
      if (a.rank() != 1) throw FormError("gradient of a matrix row is not supported");
      return index(grad(a), n.index);
    }
    case Op::ListTensor: {
      if (e.rank() != 1) throw FormError("gradient of a matrix is not supported");
      return as_vector({grad(n.children[0]), grad(n.children[1])});
    }
    case Op::Outer:
    case Op::Det:
    case Op::Transpose:
    case Op::Trace:
      if (is_spatially_constant(e)) return zero(r);
      throw FormError(std::string("gradient of ") + op_name(e.op()) + " is not supported");
  }
  throw FormError("unhandled node in grad");
}

Expr div(const Expr& e) {
  require_valid(e);
  if (e.rank() != 1) shape_error("div expects a vector");
  if (is_function_terminal(e)) return make(Op::Div, 0, {e});
  return tr(grad(e));
}

std::vector<FunctionPtr> coefficients(const Expr& e) {
  std::unordered_set<const Node*> seen;
  std::map<std::uint64_t, FunctionPtr> found;
  std::function<void(const Expr&)> visit = [&](const Expr& x) {
    if (!seen.insert(x.get()).second) return;
    if (x.op() == Op::Coefficient) found.emplace(x.node().function->id(), x.node().function);
    for (const auto& c : x.node().children) visit(c);
  };
  visit(e);
  std::vector<FunctionPtr> out;
  for (auto& [id, f] : found) out.push_back(f);
  return out;
}

std::vector<int> argument_numbers(const Expr& e) {
  std::unordered_set<const Node*> seen;
  std::set<int> found;
  std::function<void(const Expr&)> visit = [&](const Expr& x) {
    if (!seen.insert(x.get()).second) return;
    if (x.op() == Op::Argument) found.insert(x.node().index);
    for (const auto& c : x.node().children) visit(c);
  };
  visit(e);
  return {found.begin(), found.end()};
}

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string terminal_name(const Node& n) {
  std::string s;
  if (n.op == Op::Argument) {
    s = "v_" + std::to_string(n.index);
  } else {
    s = n.function->name().empty() ? "w" + std::to_string(n.function->id()) : n.function->name();
  }
  if (n.sub >= 0) s += "[" + std::to_string(n.sub) + "]";
  return s;
}

void print(const Expr& e, std::string& out) {
  const Node& n = e.node();
  auto call = [&](const char* name) {
    out += name;
    out += '(';
    for (std::size_t k = 0; k < n.children.size(); ++k) {
      if (k) out += ", ";
      print(n.children[k], out);
    }
    out += ')';
  };
  auto infix = [&](const char* sym) {
    out += '(';
    print(n.children[0], out);
    out += ' ';
    out += sym;
    out += ' ';
    print(n.children[1], out);
    out += ')';
  };
  switch (n.op) {
    case Op::Argument:
    case Op::Coefficient: out += terminal_name(n); break;
    case Op::SpatialCoordinate: out += "x"; break;
    case Op::Constant: out += format_number(n.value); break;
    case Op::FacetNormal: out += "n"; break;
    case Op::Identity: out += "I"; break;
    case Op::Zero: out += n.rank == 0 ? "0" : "0<" + std::to_string(n.rank) + ">"; break;
    case Op::Add: infix("+"); break;
    case Op::Sub: infix("-"); break;
    case Op::Mul: infix("*"); break;
    case Op::Divide: infix("/"); break;
    case Op::Power: infix("**"); break;
    case Op::Indexed:
      print(n.children[0], out);
      out += "[" + std::to_string(n.index) + "]";
      break;
    case Op::ListTensor:
      out += '[';
      print(n.children[0], out);
      out += ", ";
      print(n.children[1], out);
      out += ']';
      break;
    default: call(op_name(n.op)); break;
  }
}

}  // namespace

std::string to_string(const Expr& e) {
  std::string out;
  print(e, out);
  return out;
}

int estimate_degree(const Expr& e) {
  std::unordered_map<const Node*, int> memo;
  std::function<int(const Expr&)> deg = [&](const Expr& x) -> int {
    if (auto it = memo.find(x.get()); it != memo.end()) return it->second;
    const Node& n = x.node();
    auto c = [&](int k) { return deg(n.children[k]); };
    int d = 0;
    switch (n.op) {
      case Op::Argument:
        d = n.sub >= 0 || !n.space->is_mixed() ? n.space->element(std::max(n.sub, 0)).degree : 2;
        break;
      case Op::Coefficient: {
        const auto& s = n.function->space();
        d = n.sub >= 0 || !s->is_mixed() ? s->element(std::max(n.sub, 0)).degree : 2;
        break;
      }
      case Op::SpatialCoordinate: d = 1; break;
      case Op::Constant:
      case Op::FacetNormal:
      case Op::Identity:
      case Op::Zero: d = 0; break;
      case Op::Grad:
      case Op::Div: d = std::max(c(0) - 1, 0); break;
      case Op::Add:
      case Op::Sub:
      case Op::ListTensor:
        for (std::size_t k = 0; k < n.children.size(); ++k) d = std::max(d, c(static_cast<int>(k)));
        break;
      case Op::Mul:
      case Op::Inner:
      case Op::Dot:
      case Op::Outer: d = c(0) + c(1); break;
      case Op::Divide: {
        const int db = c(1);
        d = c(0) + (db == 0 ? 0 : db + 2);
        break;
      }
      case Op::Power: {
        const Expr& b = n.children[1];
        const int da = c(0);
        if (b.op() == Op::Constant && b.node().value >= 0 && std::floor(b.node().value) == b.node().value) {
          d = da * static_cast<int>(b.node().value);
        } else {
          d = da == 0 ? 0 : da + 2;
        }
        break;
      }
      case Op::Sin:
      case Op::Cos:
      case Op::Exp:
      case Op::Ln:
      case Op::Sqrt: {
        const int da = c(0);
        d = da == 0 ? 0 : da + 2;
        break;
      }
      case Op::Det: d = 2 * c(0); break;
      case Op::Transpose:
      case Op::Trace:
      case Op::Indexed: d = c(0); break;
    }
    d = std::min(d, 8);
    memo.emplace(x.get(), d);
    return d;
  };
  return deg(e);
}

}  // namespace shapead
