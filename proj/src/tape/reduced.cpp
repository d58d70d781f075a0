#include "shapead/reduced.hpp"

#include "shapead/error.hpp"

namespace shapead {

Control::Control(FunctionPtr f) : f_(std::move(f)) {
  if (!f_) throw TapeError("control of a null function");
  Tape& tape = working_tape();
  var_ = tape.function_var(f_);
  if (tape.var(var_).producer >= 0) {
    throw TapeError("control '" + f_->name() + "' is written by a recorded operation; controls must be roots");
  }
}

ReducedFunctional::ReducedFunctional(const Scalar& J, std::vector<Control> controls)
    : tape_(J.tape()), output_(J.var()), controls_(std::move(controls)) {
  if (!J.on_tape()) throw TapeError("reduced functional output was not recorded on a tape");
  if (tape_.get() != &working_tape()) throw TapeError("output and controls must share the working tape");
  if (controls_.empty()) throw TapeError("reduced functional needs at least one control");
  last_block_ = tape_->var(output_).producer;

  // Controls that cannot influence the output get identically zero gradients.
  for (const auto& c : controls_) {
    std::vector<char> reach(tape_->num_variables(), 0);
    reach[c.var()] = 1;
    for (int b = 0; b <= last_block_; ++b) {
      const Block& blk = tape_->block(b);
      bool any = false;
      for (int in : blk.inputs) any = any || reach[in];
      if (any)
        for (int out : blk.outputs) reach[out] = 1;
    }
    if (!reach[output_]) {
      warn("control '" + c.function()->name() + "' does not influence the functional; its gradient is zero");
    }
  }
}

ControlValues ReducedFunctional::control_values() const {
  ControlValues v;
  for (const auto& c : controls_) v.push_back(tape_->var(c.var()).value);
  return v;
}

ControlValues ReducedFunctional::zero_directions() const {
  ControlValues v;
  for (const auto& c : controls_) v.push_back(Eigen::VectorXd::Zero(c.function()->space()->dim()));
  return v;
}

double ReducedFunctional::value() const { return tape_->var(output_).value[0]; }

void ReducedFunctional::check(const ControlValues& v) const {
  if (v.size() != controls_.size()) {
    throw TapeError("expected " + std::to_string(controls_.size()) + " control values, got " +
                    std::to_string(v.size()));
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i].size() != controls_[i].function()->space()->dim()) {
      throw TapeError("control value " + std::to_string(i) + " has the wrong dimension");
    }
  }
}

void ReducedFunctional::mark_active() {
  Tape& t = *tape_;
  for (int i = 0; i < t.num_variables(); ++i) t.var(i).active = false;
  for (const auto& c : controls_) t.var(c.var()).active = true;
  block_active_.assign(last_block_ + 1, 0);
  for (int b = 0; b <= last_block_; ++b) {
    Block& blk = t.block(b);
    bool any = false;
    for (int in : blk.inputs) any = any || t.var(in).active;
    if (!any) continue;
    block_active_[b] = 1;
    for (int out : blk.outputs) t.var(out).active = true;
  }
}

int ReducedFunctional::num_active_blocks() const {
  int n = 0;
  for (char a : block_active_) n += a;
  return n;
}

double ReducedFunctional::operator()(const ControlValues& values) {
  check(values);
  Tape& t = *tape_;
  for (std::size_t i = 0; i < controls_.size(); ++i) t.var(controls_[i].var()).value = values[i];
  mark_active();
  try {
    for (int b = 0; b <= last_block_; ++b)
      if (block_active_[b]) t.block(b).recompute(t);
  } catch (...) {
    t.restore_latest();
    throw;
  }
  t.restore_latest();
  return value();
}

ControlValues ReducedFunctional::collect(Eigen::VectorXd Variable::*field) const {
  ControlValues out;
  for (const auto& c : controls_) {
    const Eigen::VectorXd& v = tape_->var(c.var()).*field;
    out.push_back(v.size() ? v : Eigen::VectorXd::Zero(c.function()->space()->dim()));
  }
  return out;
}

ControlValues ReducedFunctional::derivative() {
  Tape& t = *tape_;
  mark_active();
  for (int i = 0; i < t.num_variables(); ++i) t.var(i).adj.resize(0);
  t.var(output_).adj = Eigen::VectorXd::Ones(1);
  for (int b = last_block_; b >= 0; --b)
    if (block_active_[b]) t.block(b).adjoint(t);
  t.restore_latest();
  return collect(&Variable::adj);
}

void ReducedFunctional::run_tlm(const ControlValues& directions) {
  check(directions);
  Tape& t = *tape_;
  mark_active();
  for (int i = 0; i < t.num_variables(); ++i) t.var(i).tlm.resize(0);
  for (std::size_t i = 0; i < controls_.size(); ++i) t.var(controls_[i].var()).tlm = directions[i];
  for (int b = 0; b <= last_block_; ++b)
    if (block_active_[b]) t.block(b).tlm(t);
}

double ReducedFunctional::tlm(const ControlValues& directions) {
  run_tlm(directions);
  tape_->restore_latest();
  const Eigen::VectorXd& d = tape_->var(output_).tlm;
  return d.size() ? d[0] : 0.0;
}

ControlValues ReducedFunctional::hessian(const ControlValues& directions) {
  run_tlm(directions);
  Tape& t = *tape_;
  for (int i = 0; i < t.num_variables(); ++i) {
    t.var(i).adj.resize(0);
    t.var(i).adj2.resize(0);
  }
  t.var(output_).adj = Eigen::VectorXd::Ones(1);
  for (int b = last_block_; b >= 0; --b) {
    if (!block_active_[b]) continue;
    t.block(b).adjoint(t);
    t.block(b).second_order(t);
  }
  t.restore_latest();
  return collect(&Variable::adj2);
}

double pairing(const ControlValues& a, const ControlValues& b) {
  if (a.size() != b.size()) throw TapeError("pairing of control lists of different length");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].dot(b[i]);
  return s;
}

ControlValues axpy(double alpha, const ControlValues& x, const ControlValues& y) {
  if (x.size() != y.size()) throw TapeError("axpy of control lists of different length");
  ControlValues out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = alpha * x[i] + y[i];
  return out;
}

}  // namespace shapead
