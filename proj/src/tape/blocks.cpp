#include "blocks.hpp"

#include <map>
#include <optional>

#include "shapead/error.hpp"

namespace shapead::tape_detail {

namespace {

void accumulate(Eigen::VectorXd& acc, const Eigen::VectorXd& x, double s = 1.0) {
  if (acc.size() == 0) {
    acc = s * x;
  } else {
    acc += s * x;
  }
}

double scalar_or_zero(const Eigen::VectorXd& v) { return v.size() ? v[0] : 0.0; }

Eigen::VectorXd or_zero(const Eigen::VectorXd& v, Eigen::Index n) {
  return v.size() ? v : Eigen::VectorXd::Zero(n);
}

bool has_active_tangent(Tape& tape, const std::vector<int>& inputs) {
  for (int in : inputs) {
    const Variable& v = tape.var(in);
    if (v.active && v.tlm.size()) return true;
  }
  return false;
}

std::vector<bool> activity(Tape& tape, const std::vector<Dependency>& deps) {
  std::vector<bool> a;
  for (const auto& d : deps) a.push_back(tape.var(d.var).active);
  return a;
}

Form sum_forms(const std::vector<Form>& parts, const std::shared_ptr<Mesh>& mesh) {
  std::vector<Integral> all;
  for (const auto& p : parts)
    for (const auto& i : p.integrals()) all.push_back(i);
  return Form(mesh, std::move(all));
}

}  // namespace

std::vector<Dependency> collect_dependencies(Tape& tape, const std::vector<const Form*>& forms,
                                             const FunctionPtr& exclude) {
  std::shared_ptr<Mesh> mesh;
  std::map<std::uint64_t, FunctionPtr> coeffs;
  for (const Form* f : forms) {
    if (!f->mesh()) continue;
    if (mesh && mesh != f->mesh()) throw TapeError("forms of one operation must share a mesh");
    mesh = f->mesh();
    for (const auto& c : coefficients(*f)) coeffs.emplace(c->id(), c);
  }
  if (!mesh) throw TapeError("operation has no form to record");
  std::vector<Dependency> deps;
  Dependency m;
  m.var = tape.mesh_var(mesh);
  m.space = coordinate_space(mesh);
  m.direction = make_function(m.space);
  deps.push_back(std::move(m));
  for (const auto& [id, f] : coeffs) {
    if (exclude && id == exclude->id()) continue;
    if (f->space()->mesh() != mesh) throw TapeError("coefficient '" + f->name() + "' lives on another mesh");
    Dependency d;
    d.var = tape.function_var(f);
    d.function = f;
    d.space = f->space();
    d.direction = make_function(d.space);
    deps.push_back(std::move(d));
  }
  return deps;
}

Form derivative(const Form& form, const Dependency& d, const Expr& direction) {
  return d.function ? gateaux_derivative(form, d.function, direction) : shape_derivative(form, direction);
}

// Sum ----------------------------------------------------------------------------------

void SumBlock::recompute(Tape& tape) {
  double v = constant;
  for (std::size_t i = 0; i < inputs.size(); ++i) v += weights[i] * tape.var(inputs[i]).value[0];
  tape.var(outputs[0]).value[0] = v;
}

void SumBlock::tlm(Tape& tape) {
  if (!has_active_tangent(tape, inputs)) return;
  double t = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) t += weights[i] * scalar_or_zero(tape.var(inputs[i]).tlm);
  tape.var(outputs[0]).tlm = Eigen::VectorXd::Constant(1, t);
}

void SumBlock::adjoint(Tape& tape) {
  const Eigen::VectorXd xi = tape.var(outputs[0]).adj;
  if (!xi.size()) return;
  for (std::size_t i = 0; i < inputs.size(); ++i) accumulate(tape.var(inputs[i]).adj, xi, weights[i]);
}

void SumBlock::second_order(Tape& tape) {
  const Eigen::VectorXd zeta = tape.var(outputs[0]).adj2;
  if (!zeta.size()) return;
  for (std::size_t i = 0; i < inputs.size(); ++i) accumulate(tape.var(inputs[i]).adj2, zeta, weights[i]);
}

// Multiply / divide ----------------------------------------------------------------------

void ScalarBinaryBlock::recompute(Tape& tape) {
  const double a = tape.var(inputs[0]).value[0];
  const double b = tape.var(inputs[1]).value[0];
  if (divide_ && b == 0.0) throw Error("division of scalars by zero during replay");
  tape.var(outputs[0]).value[0] = divide_ ? a / b : a * b;
}

void ScalarBinaryBlock::tlm(Tape& tape) {
  if (!has_active_tangent(tape, inputs)) return;
  const double a = tape.var(inputs[0]).value[0], b = tape.var(inputs[1]).value[0];
  const double da = scalar_or_zero(tape.var(inputs[0]).tlm), db = scalar_or_zero(tape.var(inputs[1]).tlm);
  const double t = divide_ ? da / b - a * db / (b * b) : da * b + a * db;
  tape.var(outputs[0]).tlm = Eigen::VectorXd::Constant(1, t);
}

void ScalarBinaryBlock::adjoint(Tape& tape) {
  const Eigen::VectorXd xi_v = tape.var(outputs[0]).adj;
  if (!xi_v.size()) return;
  const double xi = xi_v[0];
  const double a = tape.var(inputs[0]).value[0], b = tape.var(inputs[1]).value[0];
  const double ga = divide_ ? xi / b : xi * b;
  const double gb = divide_ ? -xi * a / (b * b) : xi * a;
  accumulate(tape.var(inputs[0]).adj, Eigen::VectorXd::Constant(1, ga));
  accumulate(tape.var(inputs[1]).adj, Eigen::VectorXd::Constant(1, gb));
}

void ScalarBinaryBlock::second_order(Tape& tape) {
  const double xi = scalar_or_zero(tape.var(outputs[0]).adj);
  const double zeta = scalar_or_zero(tape.var(outputs[0]).adj2);
  if (xi == 0.0 && zeta == 0.0) return;
  const double a = tape.var(inputs[0]).value[0], b = tape.var(inputs[1]).value[0];
  const double da = scalar_or_zero(tape.var(inputs[0]).tlm), db = scalar_or_zero(tape.var(inputs[1]).tlm);
  double za, zb;
  if (divide_) {
    za = zeta / b - xi * db / (b * b);
    zb = -zeta * a / (b * b) + xi * (-da / (b * b) + 2.0 * a * db / (b * b * b));
  } else {
    za = zeta * b + xi * db;
    zb = zeta * a + xi * da;
  }
  accumulate(tape.var(inputs[0]).adj2, Eigen::VectorXd::Constant(1, za));
  accumulate(tape.var(inputs[1]).adj2, Eigen::VectorXd::Constant(1, zb));
}

// Mesh move ------------------------------------------------------------------------------

void MeshMoveBlock::recompute(Tape& tape) {
  tape.restore(inputs[0]);
  tape.restore(inputs[1]);
  const auto& mesh = tape.var(inputs[0]).mesh;
  displace_mesh(*mesh, *tape.var(inputs[1]).function);
  const auto x = mesh->coordinates();
  tape.var(outputs[0]).value = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

void MeshMoveBlock::tlm(Tape& tape) {
  Eigen::VectorXd t;
  for (int in : inputs)
    if (tape.var(in).tlm.size()) accumulate(t, tape.var(in).tlm);
  tape.var(outputs[0]).tlm = std::move(t);
}

void MeshMoveBlock::adjoint(Tape& tape) {
  const Eigen::VectorXd xi = tape.var(outputs[0]).adj;
  if (!xi.size()) return;
  for (int in : inputs) accumulate(tape.var(in).adj, xi);
}

void MeshMoveBlock::second_order(Tape& tape) {
  const Eigen::VectorXd zeta = tape.var(outputs[0]).adj2;
  if (!zeta.size()) return;
  for (int in : inputs) accumulate(tape.var(in).adj2, zeta);
}

// Assign ---------------------------------------------------------------------------------

void AssignBlock::recompute(Tape& tape) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(tape.var(outputs[0]).value.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) v += weights[i] * tape.var(inputs[i]).value;
  tape.var(outputs[0]).value = std::move(v);
}

void AssignBlock::tlm(Tape& tape) {
  Eigen::VectorXd t;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (tape.var(inputs[i]).tlm.size()) accumulate(t, tape.var(inputs[i]).tlm, weights[i]);
  tape.var(outputs[0]).tlm = std::move(t);
}

void AssignBlock::adjoint(Tape& tape) {
  const Eigen::VectorXd xi = tape.var(outputs[0]).adj;
  if (!xi.size()) return;
  for (std::size_t i = 0; i < inputs.size(); ++i) accumulate(tape.var(inputs[i]).adj, xi, weights[i]);
}

void AssignBlock::second_order(Tape& tape) {
  const Eigen::VectorXd zeta = tape.var(outputs[0]).adj2;
  if (!zeta.size()) return;
  for (std::size_t i = 0; i < inputs.size(); ++i) accumulate(tape.var(inputs[i]).adj2, zeta, weights[i]);
}

// Scatter --------------------------------------------------------------------------------

Eigen::VectorXd ScatterBlock::scatter(const Eigen::VectorXd& h) const {
  const auto& bm = *h_->space()->boundary_mesh();
  const int nv = out_->space()->mesh()->num_vertices();
  const int nb = bm.num_vertices();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * nv);
  for (int i = 0; i < nb; ++i) {
    const int p = bm.vertex_map()[i];
    out[p] = h[i];
    out[nv + p] = h[nb + i];
  }
  return out;
}

Eigen::VectorXd ScatterBlock::gather(const Eigen::VectorXd& parent) const {
  return gather_boundary(*h_->space(), parent);
}

void ScatterBlock::recompute(Tape& tape) { tape.var(outputs[0]).value = scatter(tape.var(inputs[0]).value); }

void ScatterBlock::tlm(Tape& tape) {
  const Eigen::VectorXd& t = tape.var(inputs[0]).tlm;
  if (t.size()) tape.var(outputs[0]).tlm = scatter(t);
}

void ScatterBlock::adjoint(Tape& tape) {
  const Eigen::VectorXd& xi = tape.var(outputs[0]).adj;
  if (xi.size()) accumulate(tape.var(inputs[0]).adj, gather(xi));
}

void ScatterBlock::second_order(Tape& tape) {
  const Eigen::VectorXd& zeta = tape.var(outputs[0]).adj2;
  if (zeta.size()) accumulate(tape.var(inputs[0]).adj2, gather(zeta));
}

// Assemble -------------------------------------------------------------------------------

AssembleBlock::AssembleBlock(Form form, std::vector<Dependency> deps)
    : form_(std::move(form)), deps_(std::move(deps)), first_(deps_.size()), second_(deps_.size()),
      gradient_(deps_.size()) {
  for (const auto& d : deps_) inputs.push_back(d.var);
}

void AssembleBlock::restore_inputs(Tape& tape) {
  for (const auto& d : deps_) tape.restore(d.var);
}

void AssembleBlock::set_directions(Tape& tape) {
  for (const auto& d : deps_) d.direction->dofs() = or_zero(tape.var(d.var).tlm, d.space->dim());
}

const Form& AssembleBlock::first_derivative(int k) {
  if (!first_[k]) first_[k] = std::make_unique<Form>(derivative(form_, deps_[k], TestFunction(deps_[k].space)));
  return *first_[k];
}

// Tangent forms only differentiate with respect to active dependencies; an inactive mesh
// may carry integrals that have no shape derivative.
void AssembleBlock::sync_activity(Tape& tape) {
  auto a = activity(tape, deps_);
  if (a == active_) return;
  active_ = std::move(a);
  tangent_.reset();
  for (auto& f : second_) f.reset();
}

const Form& AssembleBlock::tangent_form() {
  if (!tangent_) {
    std::vector<Form> parts;
    for (std::size_t k = 0; k < deps_.size(); ++k)
      if (active_[k]) parts.push_back(derivative(form_, deps_[k], coefficient(deps_[k].direction)));
    tangent_ = std::make_unique<Form>(sum_forms(parts, form_.mesh()));
  }
  return *tangent_;
}

void AssembleBlock::recompute(Tape& tape) {
  restore_inputs(tape);
  tape.var(outputs[0]).value[0] = assemble_scalar(form_);
}

void AssembleBlock::tlm(Tape& tape) {
  if (!has_active_tangent(tape, inputs)) return;
  restore_inputs(tape);
  set_directions(tape);
  sync_activity(tape);
  tape.var(outputs[0]).tlm = Eigen::VectorXd::Constant(1, assemble_scalar(tangent_form()));
}

void AssembleBlock::adjoint(Tape& tape) {
  for (auto& g : gradient_) g.resize(0);
  const Eigen::VectorXd& xi = tape.var(outputs[0]).adj;
  if (!xi.size()) return;
  restore_inputs(tape);
  for (std::size_t k = 0; k < deps_.size(); ++k) {
    if (!tape.var(deps_[k].var).active) continue;
    gradient_[k] = assemble_vector(first_derivative(static_cast<int>(k)), deps_[k].space);
    accumulate(tape.var(deps_[k].var).adj, gradient_[k], xi[0]);
  }
}

void AssembleBlock::second_order(Tape& tape) {
  const double xi = scalar_or_zero(tape.var(outputs[0]).adj);
  const double zeta = scalar_or_zero(tape.var(outputs[0]).adj2);
  if (xi == 0.0 && zeta == 0.0) return;
  restore_inputs(tape);
  set_directions(tape);
  sync_activity(tape);
  const bool tangent = has_active_tangent(tape, inputs);
  for (std::size_t k = 0; k < deps_.size(); ++k) {
    Variable& v = tape.var(deps_[k].var);
    if (!v.active) continue;
    if (zeta != 0.0) {
      if (!gradient_[k].size()) {
        gradient_[k] = assemble_vector(first_derivative(static_cast<int>(k)), deps_[k].space);
      }
      accumulate(v.adj2, gradient_[k], zeta);
    }
    if (xi != 0.0 && tangent) {
      if (!second_[k]) {
        second_[k] = std::make_unique<Form>(derivative(tangent_form(), deps_[k], TestFunction(deps_[k].space)));
      }
      accumulate(v.adj2, assemble_vector(*second_[k], deps_[k].space), xi);
    }
  }
}

// Solve ----------------------------------------------------------------------------------

SolveBlock::SolveBlock(Form F, BCs bcs, FunctionPtr u, std::vector<Dependency> deps)
    : F_(std::move(F)), bcs_(std::move(bcs)), u_(std::move(u)), deps_(std::move(deps)) {
  test_space_ = F_.argument_space(0);
  if (!test_space_) throw TapeError("solve: residual has no test function");
  for (const auto& d : deps_) inputs.push_back(d.var);
  adjoint_forms_.resize(deps_.size());
  second_forms_.resize(deps_.size());
  fixed_ = bc_dofs(bcs_);
  lambda_ = make_function(test_space_);
  dlambda_ = make_function(test_space_);
  du_ = make_function(u_->space());

  // Constrained values that move with the mesh. The last bc touching a dof wins, as in
  // set_bc_values.
  std::map<int, std::optional<BoundaryPoint>> by_dof;
  for (const auto& bc : bcs_) {
    for (const auto& loc : bc.space->boundary_dofs(bc.sub, bc.tag)) {
      if (!bc.depends_on_x()) {
        by_dof[loc.dof] = std::nullopt;
        continue;
      }
      const Expr comp = bc.value.rank() == 0 ? bc.value : bc.value[loc.component];
      const Expr g = grad(comp);
      by_dof[loc.dof] = BoundaryPoint{loc.dof, loc.va, loc.vb, g, grad(g)};
    }
  }
  for (auto& [dof, p] : by_dof)
    if (p) moving_bc_.push_back(*p);
}

void SolveBlock::set_linear(Form a, Form L, std::shared_ptr<LUSolver> lu) {
  linear_ = true;
  a_ = std::move(a);
  L_ = std::move(L);
  lu_ = std::move(lu);
}

void SolveBlock::set_newton(NewtonOptions opts, Eigen::VectorXd guess) {
  linear_ = false;
  opts_ = opts;
  guess_ = std::move(guess);
}

int SolveBlock::mesh_dep() const {
  for (std::size_t k = 0; k < deps_.size(); ++k)
    if (!deps_[k].function) return static_cast<int>(k);
  return -1;
}

void SolveBlock::restore_state(Tape& tape) {
  for (const auto& d : deps_) tape.restore(d.var);
  tape.restore(outputs[0]);
}

void SolveBlock::set_directions(Tape& tape) {
  for (const auto& d : deps_) d.direction->dofs() = or_zero(tape.var(d.var).tlm, d.space->dim());
}

void SolveBlock::sync_activity(Tape& tape) {
  auto a = activity(tape, deps_);
  if (a == active_) return;
  active_ = std::move(a);
  tangent_.reset();
  h1_.reset();
  du_h1_.reset();
  for (auto& f : second_forms_) f.reset();
}

const LUSolver& SolveBlock::jacobian() {
  if (!lu_) {
    if (!jac_) jac_ = std::make_unique<Form>(gateaux_derivative(F_, u_, TrialFunction(u_->space())));
    SparseMatrix A = assemble_matrix(*jac_, test_space_, u_->space());
    apply_dirichlet_rows(A, fixed_);
    lu_ = std::make_shared<LUSolver>(A);
  }
  return *lu_;
}

void SolveBlock::recompute(Tape& tape) {
  for (const auto& d : deps_) tape.restore(d.var);
  if (linear_) {
    lu_ = solve_linear_system(a_, L_, bcs_, *u_);
  } else {
    u_->dofs() = guess_;
    lu_.reset();
    newton_solve(F_, bcs_, u_, opts_);
  }
  tape.var(outputs[0]).value = u_->dofs();
}

namespace {

struct PointWeights {
  int va, vb;
  double wa, wb;
};

PointWeights weights_of(int va, int vb) {
  if (va == vb) return {va, vb, 1.0, 0.0};
  return {va, vb, 0.5, 0.5};
}

}  // namespace

double SolveBlock::bc_tangent(const BoundaryPoint& p, const Eigen::VectorXd& dX) const {
  const auto& mesh = *u_->space()->mesh();
  const int nv = mesh.num_vertices();
  const auto w = weights_of(p.va, p.vb);
  const auto& xa = mesh.vertices()[p.va];
  const auto& xb = mesh.vertices()[p.vb];
  const Point x{w.wa * xa[0] + (1.0 - w.wa) * xb[0], w.wa * xa[1] + (1.0 - w.wa) * xb[1]};
  const auto g = evaluate_at(p.gradient, x);
  const double dx = w.wa * dX[p.va] + w.wb * dX[p.vb];
  const double dy = w.wa * dX[nv + p.va] + w.wb * dX[nv + p.vb];
  return g[0] * dx + g[1] * dy;
}

void SolveBlock::add_bc_adjoint(Eigen::VectorXd& acc, const Eigen::VectorXd& weights) const {
  const auto& mesh = *u_->space()->mesh();
  const int nv = mesh.num_vertices();
  if (acc.size() == 0) acc = Eigen::VectorXd::Zero(2 * nv);
  for (const auto& p : moving_bc_) {
    const double c = weights[p.dof];
    if (c == 0.0) continue;
    const auto w = weights_of(p.va, p.vb);
    const auto& xa = mesh.vertices()[p.va];
    const auto& xb = mesh.vertices()[p.vb];
    const Point x{w.wa * xa[0] + (1.0 - w.wa) * xb[0], w.wa * xa[1] + (1.0 - w.wa) * xb[1]};
    const auto g = evaluate_at(p.gradient, x);
    acc[p.va] += w.wa * c * g[0];
    acc[nv + p.va] += w.wa * c * g[1];
    acc[p.vb] += w.wb * c * g[0];
    acc[nv + p.vb] += w.wb * c * g[1];
  }
}

void SolveBlock::add_bc_second_order(Eigen::VectorXd& acc, const Eigen::VectorXd& lambda,
                                     const Eigen::VectorXd& dX) const {
  const auto& mesh = *u_->space()->mesh();
  const int nv = mesh.num_vertices();
  if (acc.size() == 0) acc = Eigen::VectorXd::Zero(2 * nv);
  for (const auto& p : moving_bc_) {
    const double c = lambda[p.dof];
    if (c == 0.0) continue;
    const auto w = weights_of(p.va, p.vb);
    const auto& xa = mesh.vertices()[p.va];
    const auto& xb = mesh.vertices()[p.vb];
    const Point x{w.wa * xa[0] + (1.0 - w.wa) * xb[0], w.wa * xa[1] + (1.0 - w.wa) * xb[1]};
    const auto H = evaluate_at(p.hessian, x);
    const double dx = w.wa * dX[p.va] + w.wb * dX[p.vb];
    const double dy = w.wa * dX[nv + p.va] + w.wb * dX[nv + p.vb];
    const double hx = c * (H[0] * dx + H[1] * dy);
    const double hy = c * (H[2] * dx + H[3] * dy);
    acc[p.va] += w.wa * hx;
    acc[nv + p.va] += w.wa * hy;
    acc[p.vb] += w.wb * hx;
    acc[nv + p.vb] += w.wb * hy;
  }
}

void SolveBlock::tlm(Tape& tape) {
  if (!has_active_tangent(tape, inputs)) return;
  restore_state(tape);
  set_directions(tape);
  sync_activity(tape);
  if (!tangent_) {
    std::vector<Form> parts;
    for (std::size_t k = 0; k < deps_.size(); ++k)
      if (active_[k]) parts.push_back(derivative(F_, deps_[k], coefficient(deps_[k].direction)));
    tangent_ = std::make_unique<Form>(sum_forms(parts, F_.mesh()));
  }
  Eigen::VectorXd rhs = -assemble_vector(*tangent_, test_space_);
  zero_entries(rhs, fixed_);
  const int m = mesh_dep();
  if (m >= 0 && !moving_bc_.empty() && tape.var(deps_[m].var).tlm.size()) {
    const Eigen::VectorXd& dX = tape.var(deps_[m].var).tlm;
    for (const auto& p : moving_bc_) rhs[p.dof] = bc_tangent(p, dX);
  }
  tape.var(outputs[0]).tlm = jacobian().solve(rhs);
}

void SolveBlock::adjoint(Tape& tape) {
  have_adjoint_ = false;
  const Eigen::VectorXd& xi = tape.var(outputs[0]).adj;
  if (!xi.size()) return;
  restore_state(tape);
  lt_ = jacobian().solve_transpose(xi);
  Eigen::VectorXd lambda = lt_;
  zero_entries(lambda, fixed_);
  lambda_->dofs() = lambda;
  if (!lambda_form_) lambda_form_ = std::make_unique<Form>(replace_argument(F_, 0, coefficient(lambda_)));
  for (std::size_t k = 0; k < deps_.size(); ++k) {
    Variable& v = tape.var(deps_[k].var);
    if (!v.active) continue;
    if (!adjoint_forms_[k]) {
      adjoint_forms_[k] =
          std::make_unique<Form>(derivative(*lambda_form_, deps_[k], TestFunction(deps_[k].space)));
    }
    accumulate(v.adj, assemble_vector(*adjoint_forms_[k], deps_[k].space), -1.0);
  }
  const int m = mesh_dep();
  if (m >= 0 && !moving_bc_.empty() && tape.var(deps_[m].var).active) add_bc_adjoint(tape.var(deps_[m].var).adj, lt_);
  have_adjoint_ = true;
}

void SolveBlock::second_order(Tape& tape) {
  const Eigen::VectorXd& zeta = tape.var(outputs[0]).adj2;
  if (!have_adjoint_ && !zeta.size()) return;
  restore_state(tape);
  set_directions(tape);
  sync_activity(tape);
  const int n = test_space_->dim();
  du_->dofs() = or_zero(tape.var(outputs[0]).tlm, u_->space()->dim());
  if (!have_adjoint_) {
    lt_ = Eigen::VectorXd::Zero(n);
    lambda_->dofs().setZero();
  }
  if (!lambda_form_) lambda_form_ = std::make_unique<Form>(replace_argument(F_, 0, coefficient(lambda_)));
  if (!h1_) {
    std::vector<Form> parts{gateaux_derivative(*lambda_form_, u_, coefficient(du_))};
    for (std::size_t k = 0; k < deps_.size(); ++k)
      if (active_[k]) parts.push_back(derivative(*lambda_form_, deps_[k], coefficient(deps_[k].direction)));
    h1_ = std::make_unique<Form>(sum_forms(parts, F_.mesh()));
    du_h1_ = std::make_unique<Form>(gateaux_derivative(*h1_, u_, TestFunction(u_->space())));
  }
  Eigen::VectorXd rhs = or_zero(zeta, n);
  if (have_adjoint_) rhs -= assemble_vector(*du_h1_, u_->space());
  const Eigen::VectorXd dlt = jacobian().solve_transpose(rhs);
  Eigen::VectorXd dl = dlt;
  zero_entries(dl, fixed_);
  dlambda_->dofs() = dl;
  for (std::size_t k = 0; k < deps_.size(); ++k) {
    Variable& v = tape.var(deps_[k].var);
    if (!v.active) continue;
    if (!second_forms_[k]) {
      const Form g = replace_argument(F_, 0, coefficient(dlambda_)) + *h1_;
      second_forms_[k] = std::make_unique<Form>(derivative(g, deps_[k], TestFunction(deps_[k].space)));
    }
    accumulate(v.adj2, assemble_vector(*second_forms_[k], deps_[k].space), -1.0);
  }
  const int m = mesh_dep();
  if (m >= 0 && !moving_bc_.empty() && tape.var(deps_[m].var).active) {
    Variable& mv = tape.var(deps_[m].var);
    add_bc_adjoint(mv.adj2, dlt);
    if (have_adjoint_ && mv.tlm.size()) add_bc_second_order(mv.adj2, lt_, mv.tlm);
  }
}

}  // namespace shapead::tape_detail
