#pragma once

#include <memory>
#include <vector>

#include "shapead/expr.hpp"

namespace shapead {

enum class IntegralKind { Cell, ExteriorFacet };

struct Integral {
  Expr integrand;
  IntegralKind kind = IntegralKind::Cell;
  std::vector<int> tags;  // exterior facets only; empty = every marked facet
  int degree = -1;        // quadrature degree, -1 = estimate from the integrand
};

/// Integration measure; `dx(mesh)` over cells, `ds(mesh)(tag)` over marked facets.
class Measure {
 public:
  Measure(std::shared_ptr<Mesh> mesh, IntegralKind kind, std::vector<int> tags = {}, int degree = -1)
      : mesh_(std::move(mesh)), kind_(kind), tags_(std::move(tags)), degree_(degree) {}

  Measure operator()(int tag) const { return Measure(mesh_, kind_, {tag}, degree_); }
  Measure operator()(std::vector<int> tags) const { return Measure(mesh_, kind_, std::move(tags), degree_); }
  Measure with_degree(int degree) const { return Measure(mesh_, kind_, tags_, degree); }

  const std::shared_ptr<Mesh>& mesh() const { return mesh_; }
  IntegralKind kind() const { return kind_; }
  const std::vector<int>& tags() const { return tags_; }
  int degree() const { return degree_; }

 private:
  std::shared_ptr<Mesh> mesh_;
  IntegralKind kind_;
  std::vector<int> tags_;
  int degree_;
};

inline Measure dx(std::shared_ptr<Mesh> mesh) { return Measure(std::move(mesh), IntegralKind::Cell); }
inline Measure ds(std::shared_ptr<Mesh> mesh) { return Measure(std::move(mesh), IntegralKind::ExteriorFacet); }

/// Sum of integrals over one mesh.
class Form {
 public:
  Form() = default;
  Form(std::shared_ptr<Mesh> mesh, std::vector<Integral> integrals)
      : mesh_(std::move(mesh)), integrals_(std::move(integrals)) {}

  const std::shared_ptr<Mesh>& mesh() const { return mesh_; }
  const std::vector<Integral>& integrals() const { return integrals_; }
  bool empty() const { return integrals_.empty(); }

  /// Number of arguments (0, 1 or 2). Throws FormError when integrals disagree, which
  /// happens for forms mixing bilinear and linear terms before lhs/rhs splitting.
  int arity() const;
  /// Argument space for number 0 (test) or 1 (trial); null when absent.
  SpacePtr argument_space(int number) const;

 private:
  std::shared_ptr<Mesh> mesh_;
  std::vector<Integral> integrals_;
};

Form operator*(const Expr& integrand, const Measure& measure);
Form operator+(const Form& a, const Form& b);
Form operator-(const Form& a, const Form& b);
Form operator-(const Form& a);
Form operator*(double s, const Form& f);

/// Every coefficient function of every integrand, ordered by function id.
std::vector<FunctionPtr> coefficients(const Form& form);
bool depends_on_spatial_coordinate(const Form& form);
std::string to_string(const Form& form);

/// Quadrature degree used for each integral (explicit degree or the estimate).
int resolved_degree(const Integral& integral);
int estimate_quadrature_degree(const Form& form);

// Transforms. Derived integrals inherit the resolved quadrature degree of the source
// integral, so a transformed form is the exact derivative of the discrete (quadrature)
// form it came from.

/// d/de F(w + e*direction) at e = 0. `direction` is a whole argument or coefficient on the
/// space of `wrt` (or any expression of matching rank for non-mixed spaces).
Form gateaux_derivative(const Form& form, const FunctionPtr& wrt, const Expr& direction);
/// Same, differentiating with respect to an argument (used to split off bilinear parts).
Form argument_derivative(const Form& form, int number, const Expr& direction);

/// Shape derivative for perturbations X -> X + e*V of the integration mesh with
/// coefficient dofs held fixed. Facet integrals are rejected.
Form shape_derivative(const Form& form, const Expr& direction);

/// Swap the test and trial arguments of a bilinear form.
Form adjoint_form(const Form& form);
/// Replace the highest-numbered argument by a function.
Form action(const Form& form, const FunctionPtr& f);
/// Replace argument `number` by an expression (which must not be itself an argument of the
/// same number).
Form replace_argument(const Form& form, int number, const Expr& replacement);
/// Replace a coefficient function everywhere by another expression of the same rank.
Form replace_coefficient(const Form& form, const FunctionPtr& f, const Expr& replacement);

/// Bilinear and linear parts of a form F(w; v) affine in the trial function w:
/// lhs(F) = dF/dw[w], rhs(F) = -F(0; v), so that F = 0 <=> lhs == rhs.
Form lhs(const Form& form);
Form rhs(const Form& form);

}  // namespace shapead
