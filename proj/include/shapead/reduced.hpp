#pragma once

#include <string>
#include <vector>

#include "shapead/tape.hpp"

namespace shapead {

using ControlValues = std::vector<Eigen::VectorXd>;

/// A function whose current tape version (a root) is an independent variable.
class Control {
 public:
  explicit Control(FunctionPtr f);
  const FunctionPtr& function() const { return f_; }
  int var() const { return var_; }

 private:
  FunctionPtr f_;
  int var_;
};

/// Control values -> recorded forward model -> scalar. Gradients are co-vectors in the
/// dof basis of each control.
class ReducedFunctional {
 public:
  ReducedFunctional(const Scalar& J, std::vector<Control> controls);

  std::size_t num_controls() const { return controls_.size(); }
  const std::vector<Control>& controls() const { return controls_; }
  ControlValues control_values() const;
  ControlValues zero_directions() const;
  /// Value at the last evaluated (or recorded) control values.
  double value() const;

  /// Replays the tape with new control values.
  double operator()(const ControlValues& values);
  /// Adjoint gradient at the last evaluated point.
  ControlValues derivative();
  /// Directional derivative by the tangent linear model.
  double tlm(const ControlValues& directions);
  /// Hessian action by forward-over-reverse.
  ControlValues hessian(const ControlValues& directions);

  Tape& tape() { return *tape_; }
  int num_active_blocks() const;

 private:
  void check(const ControlValues& v) const;
  void mark_active();
  void run_tlm(const ControlValues& directions);
  ControlValues collect(Eigen::VectorXd Variable::*field) const;

  std::shared_ptr<Tape> tape_;
  int output_;
  int last_block_;
  std::vector<Control> controls_;
  std::vector<char> block_active_;
};

/// Sum over controls of a_i . b_i.
double pairing(const ControlValues& a, const ControlValues& b);
ControlValues axpy(double alpha, const ControlValues& x, const ControlValues& y);  // alpha x + y

/// Taylor remainders at h = h0 / 2^k, k = 0..halvings:
///   R0 = |J(m + h dm) - J(m)|, R1 = |R0 term - h dJ.dm|, R2 = |R1 term - h^2/2 dm.H.dm|.
struct TaylorResult {
  std::vector<double> h, R0, R1, R2;
  std::vector<double> rate0, rate1, rate2;  // halvings entries; NaN on underflow
  double J = 0.0;
  double dJdm = 0.0;
  double dmHdm = 0.0;
  bool second_order = true;
  std::vector<std::string> notes;

  std::string to_json() const;  // {h, R0, R1, R2, rate0, rate1, rate2, ...}
  std::string to_text() const;  // aligned table: h, R0, rate, R1, rate, R2, rate
  /// Smallest rate of the given order over all rows (NaN rows skipped; NaN if none).
  double min_rate(int order) const;
  double max_rate(int order) const;
};

/// Residuals below this are treated as round-off and get a NaN rate.
inline constexpr double kTaylorUnderflow = 1e-15;

TaylorResult taylor_test(ReducedFunctional& rf, const ControlValues& values, const ControlValues& directions,
                         double h0, int halvings, bool second_order = true);

}  // namespace shapead
