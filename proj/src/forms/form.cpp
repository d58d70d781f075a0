#include "shapead/form.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

#include "shapead/error.hpp"

namespace shapead {

namespace {

std::set<int> argument_set(const Expr& e) {
  auto v = argument_numbers(e);
  return {v.begin(), v.end()};
}

int arity_of(const std::set<int>& s) {
  if (s.empty()) return 0;
  if (s == std::set<int>{0}) return 1;
  if (s == std::set<int>{0, 1}) return 2;
  throw FormError("form has a trial function but no test function");
}

// Sums whose operands carry different arguments make the integrand affine rather than multilinear.
void check_homogeneous(const Expr& e) {
  const Node& n = e.node();
  if (n.op == Op::Add || n.op == Op::Sub) {
    if (argument_set(n.children[0]) != argument_set(n.children[1])) {
      throw FormError("integrand mixes terms of different arity; split with lhs/rhs");
    }
  }
  for (const auto& c : n.children) check_homogeneous(c);
}

void append_nonzero(std::vector<Integral>& out, const Integral& src, Expr integrand) {
  if (integrand.is_zero()) return;
  if (integrand.rank() != 0) throw FormError("integrand must be scalar-valued");
  Integral i = src;
  i.integrand = std::move(integrand);
  out.push_back(std::move(i));
}

// Rebuild a compound node from (possibly new) children through the simplifying builders.
Expr rebuild(const Expr& e, const std::vector<Expr>& c) {
  const Node& n = e.node();
  switch (n.op) {
    case Op::Grad: return grad(c[0]);
    case Op::Div: return div(c[0]);
    case Op::Add: return c[0] + c[1];
    case Op::Sub: return c[0] - c[1];
    case Op::Mul: return c[0] * c[1];
    case Op::Divide: return c[0] / c[1];
    case Op::Inner: return inner(c[0], c[1]);
    case Op::Dot: return dot(c[0], c[1]);
    case Op::Outer: return outer(c[0], c[1]);
    case Op::Power: return pow(c[0], c[1]);
    case Op::Sin: return sin(c[0]);
    case Op::Cos: return cos(c[0]);
    case Op::Exp: return exp(c[0]);
    case Op::Ln: return ln(c[0]);
    case Op::Sqrt: return sqrt(c[0]);
    case Op::Det: return det(c[0]);
    case Op::Transpose: return transpose(c[0]);
    case Op::Trace: return tr(c[0]);
    case Op::Indexed: return index(c[0], n.index);
    case Op::ListTensor: return as_vector(c);
    default: return e;
  }
}

using LeafMap = std::function<std::optional<Expr>(const Expr&)>;

// Substitute Argument/Coefficient terminals; Grad/Div of a substituted terminal are rebuilt
// so derivatives move onto the replacement.
Expr substitute(const Expr& e, const LeafMap& leaf, std::unordered_map<const Node*, Expr>& memo) {
  if (auto it = memo.find(e.get()); it != memo.end()) return it->second;
  Expr out = e;
  if (e.op() == Op::Argument || e.op() == Op::Coefficient) {
    if (auto r = leaf(e)) out = *r;
  } else if (!e.node().children.empty()) {
    std::vector<Expr> c;
    bool changed = false;
    for (const auto& ch : e.node().children) {
      c.push_back(substitute(ch, leaf, memo));
      changed = changed || c.back().get() != ch.get();
    }
    if (changed) out = rebuild(e, c);
  }
  memo.emplace(e.get(), out);
  return out;
}

Form map_integrands(const Form& form, const std::function<Expr(const Integral&)>& fn) {
  std::vector<Integral> out;
  for (const auto& i : form.integrals()) {
    Integral src = i;
    src.degree = resolved_degree(i);
    append_nonzero(out, src, fn(i));
  }
  return Form(form.mesh(), std::move(out));
}

// Directional derivative of `e`; `terminal` handles Argument, Coefficient,
// SpatialCoordinate, FacetNormal, Grad and Div nodes and returns an invalid Expr for zero.
using TerminalRule = std::function<Expr(const Expr&)>;

class Differentiator {
 public:
  explicit Differentiator(TerminalRule rule) : rule_(std::move(rule)) {}

  Expr operator()(const Expr& e) {
    if (auto it = memo_.find(e.get()); it != memo_.end()) return it->second;
    Expr d = compute(e);
    if (!d.valid()) d = zero(e.rank());
    memo_.emplace(e.get(), d);
    return d;
  }

 private:
  Expr compute(const Expr& e) {
    const Node& n = e.node();
    const auto& c = n.children;
    switch (n.op) {
      case Op::Constant:
      case Op::Zero:
      case Op::Identity: return zero(e.rank());
      case Op::Argument:
      case Op::Coefficient:
      case Op::SpatialCoordinate:
      case Op::FacetNormal:
      case Op::Grad:
      case Op::Div: return rule_(e);
      case Op::Add: return (*this)(c[0]) + (*this)(c[1]);
      case Op::Sub: return (*this)(c[0]) - (*this)(c[1]);
      case Op::Mul: return (*this)(c[0]) * c[1] + c[0] * (*this)(c[1]);
      case Op::Divide: {
        const Expr da = (*this)(c[0]);
        const Expr db = (*this)(c[1]);
        return da / c[1] - c[0] * db / (c[1] * c[1]);
      }
      case Op::Inner: return inner((*this)(c[0]), c[1]) + inner(c[0], (*this)(c[1]));
      case Op::Dot: return dot((*this)(c[0]), c[1]) + dot(c[0], (*this)(c[1]));
      case Op::Outer: return outer((*this)(c[0]), c[1]) + outer(c[0], (*this)(c[1]));
      case Op::Power: {
        const Expr da = (*this)(c[0]);
        const Expr db = (*this)(c[1]);
        Expr d = c[1] * pow(c[0], c[1] - 1.0) * da;
        if (!db.is_zero()) d = d + e * ln(c[0]) * db;
        return d;
      }
      case Op::Sin: return cos(c[0]) * (*this)(c[0]);
      case Op::Cos: return -sin(c[0]) * (*this)(c[0]);
      case Op::Exp: return e * (*this)(c[0]);
      case Op::Ln: return (*this)(c[0]) / c[0];
      case Op::Sqrt: return (*this)(c[0]) / (2.0 * e);
      case Op::Det: {
        const Expr& a = c[0];
        const Expr da = (*this)(a);
        if (da.is_zero()) return zero(0);
        auto at = [](const Expr& m, int i, int j) { return index(index(m, i), j); };
        return at(da, 0, 0) * at(a, 1, 1) + at(a, 0, 0) * at(da, 1, 1) - at(da, 0, 1) * at(a, 1, 0) -
               at(a, 0, 1) * at(da, 1, 0);
      }
      case Op::Transpose: return transpose((*this)(c[0]));
      case Op::Trace: return tr((*this)(c[0]));
      case Op::Indexed: return index((*this)(c[0]), n.index);
      case Op::ListTensor: return as_vector({(*this)(c[0]), (*this)(c[1])});
    }
    throw FormError("unhandled node in differentiation");
  }

  TerminalRule rule_;
  std::unordered_map<const Node*, Expr> memo_;
};

// Component `sub` of a whole argument/coefficient expression, or the expression itself.
Expr component(const Expr& whole, int sub, int rank) {
  if (whole.is_zero()) return zero(rank);
  if (sub < 0) return whole;
  if ((whole.op() == Op::Argument || whole.op() == Op::Coefficient) && whole.node().sub < 0) return whole.sub(sub);
  throw FormError("mixed-space component needs a whole argument or coefficient as replacement");
}

void check_rank(const Expr& replacement, int rank) {
  if (replacement.rank() != rank) {
    throw FormError("shape mismatch: direction of rank " + std::to_string(replacement.rank()) +
                    " for a quantity of rank " + std::to_string(rank));
  }
}

}  // namespace

int Form::arity() const {
  if (integrals_.empty()) return 0;
  const int a = arity_of(argument_set(integrals_[0].integrand));
  for (const auto& i : integrals_) {
    check_homogeneous(i.integrand);
    if (arity_of(argument_set(i.integrand)) != a) {
      throw FormError("integrals of different arity in one form; split with lhs/rhs");
    }
  }
  return a;
}

SpacePtr Form::argument_space(int number) const {
  SpacePtr found;
  for (const auto& i : integrals_) {
    std::function<void(const Expr&)> visit = [&](const Expr& e) {
      if (found) return;
      if (e.op() == Op::Argument && e.node().index == number) {
        found = e.node().space;
        return;
      }
      for (const auto& c : e.node().children) visit(c);
    };
    visit(i.integrand);
    if (found) break;
  }
  return found;
}

Form operator*(const Expr& integrand, const Measure& measure) {
  if (!integrand.valid()) throw FormError("empty integrand");
  if (integrand.rank() != 0) throw FormError("integrand must be scalar-valued");
  if (!measure.mesh()) throw FormError("measure has no mesh");
  if (measure.kind() == IntegralKind::Cell && !measure.tags().empty()) {
    throw FormError("cell subdomain tags are not supported");
  }
  std::vector<Integral> integrals;
  if (!integrand.is_zero()) integrals.push_back({integrand, measure.kind(), measure.tags(), measure.degree()});
  return Form(measure.mesh(), std::move(integrals));
}

Form operator+(const Form& a, const Form& b) {
  if (a.mesh() && b.mesh() && a.mesh() != b.mesh()) throw FormError("cannot add forms on different meshes");
  std::vector<Integral> all = a.integrals();
  all.insert(all.end(), b.integrals().begin(), b.integrals().end());
  return Form(a.mesh() ? a.mesh() : b.mesh(), std::move(all));
}

Form operator-(const Form& a) {
  std::vector<Integral> out;
  for (auto i : a.integrals()) {
    i.integrand = -i.integrand;
    out.push_back(std::move(i));
  }
  return Form(a.mesh(), std::move(out));
}

Form operator-(const Form& a, const Form& b) { return a + (-b); }

Form operator*(double s, const Form& f) {
  std::vector<Integral> out;
  if (s != 0.0) {
    for (auto i : f.integrals()) {
      i.integrand = s * i.integrand;
      out.push_back(std::move(i));
    }
  }
  return Form(f.mesh(), std::move(out));
}

std::vector<FunctionPtr> coefficients(const Form& form) {
  std::map<std::uint64_t, FunctionPtr> found;
  for (const auto& i : form.integrals())
    for (auto& f : coefficients(i.integrand)) found.emplace(f->id(), f);
  std::vector<FunctionPtr> out;
  for (auto& [id, f] : found) out.push_back(f);
  return out;
}

bool depends_on_spatial_coordinate(const Form& form) {
  return std::any_of(form.integrals().begin(), form.integrals().end(),
                     [](const Integral& i) { return depends_on_spatial_coordinate(i.integrand); });
}

std::string to_string(const Form& form) {
  if (form.empty()) return "0";
  std::string s;
  for (std::size_t k = 0; k < form.integrals().size(); ++k) {
    const auto& i = form.integrals()[k];
    if (k) s += " + ";
    s += to_string(i.integrand);
    s += i.kind == IntegralKind::Cell ? " * dx" : " * ds";
    if (!i.tags.empty()) {
      s += '(';
      for (std::size_t t = 0; t < i.tags.size(); ++t) {
        if (t) s += ',';
        s += std::to_string(i.tags[t]);
      }
      s += ')';
    }
  }
  return s;
}

int resolved_degree(const Integral& integral) {
  return integral.degree >= 0 ? integral.degree : estimate_degree(integral.integrand);
}

int estimate_quadrature_degree(const Form& form) {
  int d = 0;
  for (const auto& i : form.integrals()) d = std::max(d, resolved_degree(i));
  return d;
}

Form gateaux_derivative(const Form& form, const FunctionPtr& wrt, const Expr& direction) {
  if (!wrt) throw FormError("gateaux derivative needs a coefficient");
  const std::uint64_t id = wrt->id();
  auto dir_for = [&](const Node& terminal) {
    const Expr d = component(direction, wrt->space()->is_mixed() ? terminal.sub : -1, terminal.rank);
    check_rank(d, terminal.rank);
    return d;
  };
  auto is_wrt = [&](const Expr& t) { return t.op() == Op::Coefficient && t.node().function->id() == id; };
  Differentiator diff([&](const Expr& e) -> Expr {
    if (is_wrt(e)) return dir_for(e.node());
    if ((e.op() == Op::Grad || e.op() == Op::Div) && is_wrt(e.node().children[0])) {
      const Expr d = dir_for(e.node().children[0].node());
      return e.op() == Op::Grad ? grad(d) : div(d);
    }
    return {};
  });
  return map_integrands(form, [&](const Integral& i) { return diff(i.integrand); });
}

Form argument_derivative(const Form& form, int number, const Expr& direction) {
  auto is_arg = [&](const Expr& t) { return t.op() == Op::Argument && t.node().index == number; };
  auto dir_for = [&](const Node& terminal) {
    const Expr d = component(direction, terminal.space->is_mixed() ? terminal.sub : -1, terminal.rank);
    check_rank(d, terminal.rank);
    return d;
  };
  Differentiator diff([&](const Expr& e) -> Expr {
    if (is_arg(e)) return dir_for(e.node());
    if ((e.op() == Op::Grad || e.op() == Op::Div) && is_arg(e.node().children[0])) {
      const Expr d = dir_for(e.node().children[0].node());
      return e.op() == Op::Grad ? grad(d) : div(d);
    }
    return {};
  });
  return map_integrands(form, [&](const Integral& i) { return diff(i.integrand); });
}

Form shape_derivative(const Form& form, const Expr& direction) {
  if (!direction.valid() || direction.rank() != 1) throw FormError("shape direction must be a vector field");
  for (const auto& i : form.integrals()) {
    if (i.kind != IntegralKind::Cell) throw FormError("unsupported measure: shape derivatives of facet integrals");
  }
  const Expr gW = grad(direction);
  Differentiator diff([&](const Expr& e) -> Expr {
    switch (e.op()) {
      case Op::SpatialCoordinate: return direction;
      case Op::Grad: return -dot(e, gW);
      case Op::Div: return -tr(dot(grad(e.node().children[0]), gW));
      case Op::FacetNormal: throw FormError("unsupported measure: facet normal in a shape derivative");
      default: return {};
    }
  });
  const Expr divW = div(direction);
  return map_integrands(form, [&](const Integral& i) { return diff(i.integrand) + i.integrand * divW; });
}

Form replace_argument(const Form& form, int number, const Expr& replacement) {
  std::unordered_map<const Node*, Expr> memo;
  LeafMap leaf = [&](const Expr& t) -> std::optional<Expr> {
    if (t.op() != Op::Argument || t.node().index != number) return std::nullopt;
    const Node& n = t.node();
    Expr r = component(replacement, n.space->is_mixed() ? n.sub : -1, n.rank);
    check_rank(r, n.rank);
    return r;
  };
  return map_integrands(form, [&](const Integral& i) { return substitute(i.integrand, leaf, memo); });
}

Form replace_coefficient(const Form& form, const FunctionPtr& f, const Expr& replacement) {
  std::unordered_map<const Node*, Expr> memo;
  LeafMap leaf = [&](const Expr& t) -> std::optional<Expr> {
    if (t.op() != Op::Coefficient || t.node().function->id() != f->id()) return std::nullopt;
    const Node& n = t.node();
    Expr r = component(replacement, f->space()->is_mixed() ? n.sub : -1, n.rank);
    check_rank(r, n.rank);
    return r;
  };
  return map_integrands(form, [&](const Integral& i) { return substitute(i.integrand, leaf, memo); });
}

Form adjoint_form(const Form& form) {
  if (form.arity() != 2) throw FormError("adjoint_form needs a bilinear form");
  std::unordered_map<const Node*, Expr> memo;
  LeafMap leaf = [&](const Expr& t) -> std::optional<Expr> {
    if (t.op() != Op::Argument) return std::nullopt;
    const Node& n = t.node();
    return argument(1 - n.index, n.space, n.sub);
  };
  return map_integrands(form, [&](const Integral& i) { return substitute(i.integrand, leaf, memo); });
}

Form action(const Form& form, const FunctionPtr& f) {
  const int a = form.arity();
  if (a == 0) throw FormError("action needs a form with arguments");
  const SpacePtr space = form.argument_space(a - 1);
  if (space && f->space() != space && f->space()->dim() != space->dim()) {
    throw FormError("action: function space does not match the argument space");
  }
  return replace_argument(form, a - 1, coefficient(f));
}

Form lhs(const Form& form) {
  const SpacePtr trial = form.argument_space(1);
  if (!trial) throw FormError("lhs: form has no trial function");
  return argument_derivative(form, 1, argument(1, trial));
}

Form rhs(const Form& form) { return -replace_argument(form, 1, zero(0)); }

}  // namespace shapead
