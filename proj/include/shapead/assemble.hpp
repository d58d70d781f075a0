#pragma once

#include <Eigen/Sparse>
#include <vector>

#include "shapead/form.hpp"

namespace shapead {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Assemble a functional (arity 0).
double assemble_scalar(const Form& form);
/// Assemble a linear form into a vector over the test space. `test_space` is only needed
/// when the form may be empty (e.g. a derivative that vanished symbolically).
Eigen::VectorXd assemble_vector(const Form& form, const SpacePtr& test_space = nullptr);
/// Assemble a bilinear form (rows: test dofs, columns: trial dofs).
SparseMatrix assemble_matrix(const Form& form, const SpacePtr& test_space = nullptr,
                             const SpacePtr& trial_space = nullptr);

/// Point values of an expression free of arguments, coefficients and facet normals
/// (constants and functions of the spatial coordinate). Components in row-major order.
std::vector<double> evaluate_at(const Expr& e, const Point& x);

/// Nodal interpolation of such an expression into `f` (component `sub` for mixed spaces).
void interpolate(const Expr& e, Function& f, int sub = 0);

/// Value of a function at a point inside cell `cell` (all components, row-major).
std::vector<double> evaluate_function(const Function& f, int cell, const Point& x, int sub = 0);

/// Per-dof nodal values of `f` at mesh vertices (CG2 edge dofs dropped), component-major.
std::vector<double> vertex_values(const Function& f, int sub = 0);

}  // namespace shapead
