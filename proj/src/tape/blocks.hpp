#pragma once

#include <memory>
#include <string>
#include <vector>

#include "shapead/tape.hpp"

namespace shapead::tape_detail {

/// A form's dependency on a tape variable: the mesh (shape derivative) or a coefficient
/// function (Gateaux derivative). `direction` is a placeholder coefficient that carries
/// tangents into cached derivative forms.
struct Dependency {
  int var = -1;
  FunctionPtr function;  // null for the mesh
  SpacePtr space;        // space of directions
  FunctionPtr direction;
};

/// Mesh first, then every coefficient of `forms` except `exclude`, ordered by id.
std::vector<Dependency> collect_dependencies(Tape& tape, const std::vector<const Form*>& forms,
                                             const FunctionPtr& exclude = nullptr);

/// D_d form [direction].
Form derivative(const Form& form, const Dependency& d, const Expr& direction);

class SumBlock : public Block {
 public:
  std::string name() const override { return "Sum"; }
  void recompute(Tape& tape) override;
  void tlm(Tape& tape) override;
  void adjoint(Tape& tape) override;
  void second_order(Tape& tape) override;

  std::vector<double> weights;
  double constant = 0.0;
};

class ScalarBinaryBlock : public Block {
 public:
  explicit ScalarBinaryBlock(bool divide) : divide_(divide) {}
  std::string name() const override { return divide_ ? "Divide" : "Multiply"; }
  void recompute(Tape& tape) override;
  void tlm(Tape& tape) override;
  void adjoint(Tape& tape) override;
  void second_order(Tape& tape) override;

 private:
  bool divide_;
};

class MeshMoveBlock : public Block {
 public:
  std::string name() const override { return "MeshMove"; }
  void recompute(Tape& tape) override;
  void tlm(Tape& tape) override;
  void adjoint(Tape& tape) override;
  void second_order(Tape& tape) override;
};

class AssignBlock : public Block {
 public:
  std::string name() const override { return "Assign"; }
  void recompute(Tape& tape) override;
  void tlm(Tape& tape) override;
  void adjoint(Tape& tape) override;
  void second_order(Tape& tape) override;

  std::vector<double> weights;
};

class ScatterBlock : public Block {
 public:
  explicit ScatterBlock(FunctionPtr h, FunctionPtr out) : h_(std::move(h)), out_(std::move(out)) {}
  std::string name() const override { return "Scatter"; }
  void recompute(Tape& tape) override;
  void tlm(Tape& tape) override;
  void adjoint(Tape& tape) override;
  void second_order(Tape& tape) override;

 private:
  Eigen::VectorXd scatter(const Eigen::VectorXd& h) const;
  Eigen::VectorXd gather(const Eigen::VectorXd& parent) const;
  FunctionPtr h_, out_;
};

class AssembleBlock : public Block {
 public:
  AssembleBlock(Form form, std::vector<Dependency> deps);
  std::string name() const override { return "Assemble"; }
  void recompute(Tape& tape) override;
  void tlm(Tape& tape) override;
  void adjoint(Tape& tape) override;
  void second_order(Tape& tape) override;

 private:
  void restore_inputs(Tape& tape);
  void set_directions(Tape& tape);
  const Form& first_derivative(int k);
  const Form& tangent_form();
  void sync_activity(Tape& tape);

  Form form_;
  std::vector<Dependency> deps_;
  std::vector<std::unique_ptr<Form>> first_;   // D_k J [test]
  std::vector<std::unique_ptr<Form>> second_;  // D_k (sum_j D_j J [dir_j]) [test]
  std::unique_ptr<Form> tangent_;
  std::vector<bool> active_;  // activity the tangent forms were built for
  std::vector<Eigen::VectorXd> gradient_;  // cached D_k J from the last adjoint()
};

/// Solve of F(u; v) = 0 with strong bcs: linear (a, L) or Newton.
class SolveBlock : public Block {
 public:
  SolveBlock(Form F, BCs bcs, FunctionPtr u, std::vector<Dependency> deps);
  void set_linear(Form a, Form L, std::shared_ptr<LUSolver> lu);
  void set_newton(NewtonOptions opts, Eigen::VectorXd guess);

  std::string name() const override { return linear_ ? "LinearSolve" : "NewtonSolve"; }
  void recompute(Tape& tape) override;
  void tlm(Tape& tape) override;
  void adjoint(Tape& tape) override;
  void second_order(Tape& tape) override;

 private:
  // Constrained dof whose value depends on the coordinates of vertices va, vb.
  struct BoundaryPoint {
    int dof, va, vb;
    Expr gradient;  // of the bc value component
    Expr hessian;
  };

  void restore_state(Tape& tape);
  void set_directions(Tape& tape);
  void sync_activity(Tape& tape);
  const LUSolver& jacobian();
  int mesh_dep() const;
  // Derivative of the constrained values in direction dX (blocked vertex displacements).
  double bc_tangent(const BoundaryPoint& p, const Eigen::VectorXd& dX) const;
  void add_bc_adjoint(Eigen::VectorXd& acc, const Eigen::VectorXd& weights) const;
  void add_bc_second_order(Eigen::VectorXd& acc, const Eigen::VectorXd& lambda, const Eigen::VectorXd& dX) const;

  Form F_;
  SpacePtr test_space_;
  BCs bcs_;
  FunctionPtr u_;
  std::vector<Dependency> deps_;
  std::vector<int> fixed_;
  std::vector<BoundaryPoint> moving_bc_;

  bool linear_ = true;
  Form a_, L_;
  NewtonOptions opts_;
  Eigen::VectorXd guess_;
  std::shared_ptr<LUSolver> lu_;

  // Placeholders and cached derivative forms.
  FunctionPtr lambda_, dlambda_, du_;
  std::unique_ptr<Form> jac_, tangent_, lambda_form_, h1_, du_h1_;
  std::vector<std::unique_ptr<Form>> adjoint_forms_, second_forms_;
  std::vector<bool> active_;

  Eigen::VectorXd lt_;  // adjoint solution before zeroing constrained entries
  bool have_adjoint_ = false;
};

}  // namespace shapead::tape_detail
