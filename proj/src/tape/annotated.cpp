#include "blocks.hpp"
#include "shapead/error.hpp"
#include "shapead/tape.hpp"

namespace shapead {

using tape_detail::collect_dependencies;

void solve_linear(const Form& a, const Form& L, const FunctionPtr& u, const BCs& bcs) {
  Tape& tape = working_tape();
  if (!tape.annotating()) {
    solve_linear_system(a, L, bcs, *u);
    return;
  }
  for (const Form* f : {&a, &L})
    for (const auto& c : coefficients(*f))
      if (c->id() == u->id()) throw TapeError("solve: the unknown also appears as a coefficient of the system");
  auto deps = collect_dependencies(tape, {&a, &L});
  auto lu = solve_linear_system(a, L, bcs, *u);
  const Form F = L.empty() ? action(a, u) : action(a, u) - L;
  auto block = std::make_unique<tape_detail::SolveBlock>(F, bcs, u, std::move(deps));
  block->set_linear(a, L, std::move(lu));
  block->outputs = {tape.new_version(u)};
  tape.add_block(std::move(block));
}

NewtonResult solve_newton(const Form& F, const FunctionPtr& u, const BCs& bcs, const NewtonOptions& opts) {
  Tape& tape = working_tape();
  if (!tape.annotating()) return newton_solve(F, bcs, u, opts);
  auto deps = collect_dependencies(tape, {&F}, u);
  Eigen::VectorXd guess = u->dofs();
  NewtonResult result = newton_solve(F, bcs, u, opts);
  auto block = std::make_unique<tape_detail::SolveBlock>(F, bcs, u, std::move(deps));
  block->set_newton(opts, std::move(guess));
  block->outputs = {tape.new_version(u)};
  tape.add_block(std::move(block));
  return result;
}

void move_mesh(const std::shared_ptr<Mesh>& mesh, const FunctionPtr& theta) {
  Tape& tape = working_tape();
  if (!tape.annotating()) {
    displace_mesh(*mesh, *theta);
    return;
  }
  const int in_mesh = tape.mesh_var(mesh);
  const int in_theta = tape.function_var(theta);
  displace_mesh(*mesh, *theta);
  auto block = std::make_unique<tape_detail::MeshMoveBlock>();
  block->inputs = {in_mesh, in_theta};
  block->outputs = {tape.new_version(mesh)};
  tape.add_block(std::move(block));
}

Scalar assemble(const Form& form) {
  if (form.arity() != 0) throw AssemblyError("assemble: only functionals are recorded as scalars");
  Tape& tape = working_tape();
  if (!tape.annotating() || form.empty()) return Scalar(form.empty() ? 0.0 : assemble_scalar(form));
  auto deps = collect_dependencies(tape, {&form});
  const double value = assemble_scalar(form);
  auto block = std::make_unique<tape_detail::AssembleBlock>(form, std::move(deps));
  const int out = tape.new_scalar(value);
  block->outputs = {out};
  tape.add_block(std::move(block));
  return Scalar(value, working_tape_ptr(), out);
}

void assign(const FunctionPtr& target, const std::vector<std::pair<double, FunctionPtr>>& terms) {
  const int n = target->space()->dim();
  for (const auto& [w, f] : terms) {
    if (f->space()->dim() != n) throw Error("assign: functions live in spaces of different dimension");
  }
  Tape& tape = working_tape();
  std::vector<int> inputs;
  if (tape.annotating())
    for (const auto& [w, f] : terms) inputs.push_back(tape.function_var(f));
  Eigen::VectorXd value = Eigen::VectorXd::Zero(n);
  for (const auto& [w, f] : terms) value += w * f->dofs();
  target->dofs() = std::move(value);
  if (!tape.annotating()) return;
  auto block = std::make_unique<tape_detail::AssignBlock>();
  block->inputs = std::move(inputs);
  for (const auto& [w, f] : terms) block->weights.push_back(w);
  block->outputs = {tape.new_version(target)};
  tape.add_block(std::move(block));
}

void assign(const FunctionPtr& target, const FunctionPtr& source) { assign(target, {{1.0, source}}); }

void transfer_from_boundary(const FunctionPtr& h, const FunctionPtr& out) {
  Tape& tape = working_tape();
  if (!tape.annotating()) {
    scatter_boundary(*h, *out);
    return;
  }
  const int in = tape.function_var(h);
  scatter_boundary(*h, *out);
  auto block = std::make_unique<tape_detail::ScatterBlock>(h, out);
  block->inputs = {in};
  block->outputs = {tape.new_version(out)};
  tape.add_block(std::move(block));
}

}  // namespace shapead
