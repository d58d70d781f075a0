#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "shapead/solve.hpp"

namespace shapead {

class Tape;

enum class VarKind { Function, Mesh, Scalar };

/// One version of a Function, Mesh or scalar. Every write through an annotated operation
/// creates a new version; `value` is its checkpoint (dofs, blocked coordinates, or a
/// length-1 vector).
struct Variable {
  VarKind kind = VarKind::Scalar;
  FunctionPtr function;
  std::shared_ptr<Mesh> mesh;
  Eigen::VectorXd value;
  int producer = -1;  // block index, -1 for roots
  int version = 0;

  // Sweep state. Empty vectors stand for zero.
  bool active = false;
  Eigen::VectorXd tlm, adj, adj2;
};

/// Recorded operation. Inputs and outputs are variable indices on the owning tape.
class Block {
 public:
  virtual ~Block() = default;
  virtual std::string name() const = 0;

  /// Recompute outputs from input checkpoints.
  virtual void recompute(Tape& tape) = 0;
  /// Output tangents from input tangents.
  virtual void tlm(Tape& tape) = 0;
  /// Accumulate input adjoints from output adjoints.
  virtual void adjoint(Tape& tape) = 0;
  /// Accumulate second-order input adjoints (forward-over-reverse). Runs right after
  /// adjoint() on the same block and may reuse what it computed.
  virtual void second_order(Tape& tape) = 0;

  std::vector<int> inputs;
  std::vector<int> outputs;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int num_variables() const { return static_cast<int>(vars_.size()); }
  Block& block(int i) { return *blocks_.at(i); }
  Variable& var(int i) { return vars_.at(i); }
  const Variable& var(int i) const { return vars_.at(i); }

  /// Current version of a live object. A root is created for objects the tape has not
  /// seen, and for objects whose live state no longer matches the latest checkpoint
  /// (written while recording was stopped).
  int function_var(const FunctionPtr& f);
  int mesh_var(const std::shared_ptr<Mesh>& m);
  /// New version checkpointing the live state, produced by the next block to be added.
  int new_version(const FunctionPtr& f);
  int new_version(const std::shared_ptr<Mesh>& m);
  int new_scalar(double value);

  /// Appends a block; its outputs get it as producer.
  void add_block(std::unique_ptr<Block> block);

  /// Write a checkpoint into its live object.
  void restore(int var);
  /// Put every live object into its latest recorded state.
  void restore_latest();

  bool annotating() const { return annotating_; }
  void set_annotating(bool on) { annotating_ = on; }

  void clear();

 private:
  std::vector<Variable> vars_;
  std::vector<std::unique_ptr<Block>> blocks_;
  std::unordered_map<std::uint64_t, int> latest_;  // object key -> latest version
  bool annotating_ = true;
};

/// The tape that annotated operations record onto.
Tape& working_tape();
std::shared_ptr<Tape> working_tape_ptr();
void set_working_tape(std::shared_ptr<Tape> tape);

/// Scope in which annotated operations are not recorded.
class StopAnnotating {
 public:
  StopAnnotating();
  ~StopAnnotating();
  StopAnnotating(const StopAnnotating&) = delete;
  StopAnnotating& operator=(const StopAnnotating&) = delete;

 private:
  bool previous_;
};

void pause_annotation();
void continue_annotation();

/// Scalar value that remembers its tape variable.
class Scalar {
 public:
  Scalar(double value = 0.0) : value_(value) {}  // NOLINT: plain numbers are constants
  Scalar(double value, std::shared_ptr<Tape> tape, int var) : value_(value), tape_(std::move(tape)), var_(var) {}

  double value() const { return value_; }
  int var() const { return var_; }
  bool on_tape() const { return var_ >= 0; }
  const std::shared_ptr<Tape>& tape() const { return tape_; }

  Scalar& operator+=(const Scalar& o);
  Scalar& operator-=(const Scalar& o);
  Scalar& operator*=(const Scalar& o);

 private:
  double value_;
  std::shared_ptr<Tape> tape_;
  int var_ = -1;
};

Scalar operator+(const Scalar& a, const Scalar& b);
Scalar operator-(const Scalar& a, const Scalar& b);
Scalar operator-(const Scalar& a);
Scalar operator*(const Scalar& a, const Scalar& b);
Scalar operator/(const Scalar& a, const Scalar& b);
/// Weighted sum c + sum_i w_i s_i as one block.
Scalar weighted_sum(const std::vector<std::pair<double, Scalar>>& terms, double constant = 0.0);

// Annotated operations. Each runs the plain computation and, when annotating, records a
// block on the working tape.

/// Solve a(u, v) = L(v) with strong bcs.
void solve_linear(const Form& a, const Form& L, const FunctionPtr& u, const BCs& bcs = {});
/// Newton solve of F(u; v) = 0.
NewtonResult solve_newton(const Form& F, const FunctionPtr& u, const BCs& bcs = {}, const NewtonOptions& opts = {});
/// Add a vector CG1 displacement to the coordinates of its mesh.
void move_mesh(const std::shared_ptr<Mesh>& mesh, const FunctionPtr& theta);
/// Assemble a functional.
Scalar assemble(const Form& form);
/// target = sum_i c_i f_i (all in target's space).
void assign(const FunctionPtr& target, const std::vector<std::pair<double, FunctionPtr>>& terms);
void assign(const FunctionPtr& target, const FunctionPtr& source);
/// Boundary field h (vector CG1 on a BoundaryMesh) copied onto the parent mesh; zero inside.
void transfer_from_boundary(const FunctionPtr& h, const FunctionPtr& out);

}  // namespace shapead
