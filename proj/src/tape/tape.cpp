#include "shapead/tape.hpp"

#include <algorithm>

#include "blocks.hpp"
#include "shapead/error.hpp"

namespace shapead {

namespace {

constexpr std::uint64_t kMeshBit = std::uint64_t{1} << 63;

std::uint64_t key_of(const Function& f) { return f.id(); }
std::uint64_t key_of(const Mesh& m) { return m.id() | kMeshBit; }

Eigen::VectorXd coordinates_of(const Mesh& m) {
  const auto c = m.coordinates();
  return Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
}

std::shared_ptr<Tape>& tape_slot() {
  static std::shared_ptr<Tape> tape = std::make_shared<Tape>();
  return tape;
}

}  // namespace

int Tape::function_var(const FunctionPtr& f) {
  if (!f) throw TapeError("null function");
  const auto key = key_of(*f);
  int version = 0;
  if (auto it = latest_.find(key); it != latest_.end()) {
    const Variable& v = vars_[it->second];
    if (v.value.size() == f->dofs().size() && v.value == f->dofs()) return it->second;
    version = v.version + 1;
  }
  Variable v;
  v.kind = VarKind::Function;
  v.function = f;
  v.value = f->dofs();
  v.version = version;
  vars_.push_back(std::move(v));
  latest_[key] = num_variables() - 1;
  return num_variables() - 1;
}

int Tape::mesh_var(const std::shared_ptr<Mesh>& m) {
  if (!m) throw TapeError("null mesh");
  const auto key = key_of(*m);
  Eigen::VectorXd x = coordinates_of(*m);
  int version = 0;
  if (auto it = latest_.find(key); it != latest_.end()) {
    const Variable& v = vars_[it->second];
    if (v.value == x) return it->second;
    version = v.version + 1;
  }
  Variable v;
  v.kind = VarKind::Mesh;
  v.mesh = m;
  v.value = std::move(x);
  v.version = version;
  vars_.push_back(std::move(v));
  latest_[key] = num_variables() - 1;
  return num_variables() - 1;
}

int Tape::new_version(const FunctionPtr& f) {
  const auto key = key_of(*f);
  int version = 0;
  if (auto it = latest_.find(key); it != latest_.end()) version = vars_[it->second].version + 1;
  Variable v;
  v.kind = VarKind::Function;
  v.function = f;
  v.value = f->dofs();
  v.version = version;
  v.producer = num_blocks();
  vars_.push_back(std::move(v));
  latest_[key] = num_variables() - 1;
  return num_variables() - 1;
}

int Tape::new_version(const std::shared_ptr<Mesh>& m) {
  const auto key = key_of(*m);
  int version = 0;
  if (auto it = latest_.find(key); it != latest_.end()) version = vars_[it->second].version + 1;
  Variable v;
  v.kind = VarKind::Mesh;
  v.mesh = m;
  v.value = coordinates_of(*m);
  v.version = version;
  v.producer = num_blocks();
  vars_.push_back(std::move(v));
  latest_[key] = num_variables() - 1;
  return num_variables() - 1;
}

int Tape::new_scalar(double value) {
  Variable v;
  v.kind = VarKind::Scalar;
  v.value = Eigen::VectorXd::Constant(1, value);
  v.producer = num_blocks();
  vars_.push_back(std::move(v));
  return num_variables() - 1;
}

void Tape::add_block(std::unique_ptr<Block> block) {
  for (int in : block->inputs) {
    if (in < 0 || in >= num_variables()) throw TapeError("block input refers to an unknown variable");
  }
  for (int out : block->outputs) vars_.at(out).producer = num_blocks();
  blocks_.push_back(std::move(block));
}

void Tape::restore(int index) {
  Variable& v = vars_.at(index);
  switch (v.kind) {
    case VarKind::Function: v.function->dofs() = v.value; break;
    case VarKind::Mesh: {
      const auto x = v.mesh->coordinates();
      if (!std::equal(x.begin(), x.end(), v.value.data())) {
        v.mesh->set_coordinates({v.value.data(), static_cast<std::size_t>(v.value.size())});
      }
      break;
    }
    case VarKind::Scalar: break;
  }
}

void Tape::restore_latest() {
  for (const auto& [key, index] : latest_) restore(index);
}

void Tape::clear() {
  vars_.clear();
  blocks_.clear();
  latest_.clear();
}

Tape& working_tape() { return *tape_slot(); }
std::shared_ptr<Tape> working_tape_ptr() { return tape_slot(); }
void set_working_tape(std::shared_ptr<Tape> tape) {
  if (!tape) throw TapeError("working tape cannot be null");
  tape_slot() = std::move(tape);
}

StopAnnotating::StopAnnotating() : previous_(working_tape().annotating()) { working_tape().set_annotating(false); }
StopAnnotating::~StopAnnotating() { working_tape().set_annotating(previous_); }

void pause_annotation() { working_tape().set_annotating(false); }
void continue_annotation() { working_tape().set_annotating(true); }

// Scalars.

namespace {

int scalar_var(Tape& tape, const Scalar& s) {
  if (s.on_tape()) {
    if (s.tape().get() != &tape) throw TapeError("scalar belongs to a different tape");
    return s.var();
  }
  // Constants entering a nonlinear operation become roots.
  Variable& v = tape.var(tape.new_scalar(s.value()));
  v.producer = -1;
  return tape.num_variables() - 1;
}

bool recording(const Scalar& a, const Scalar& b) {
  return working_tape().annotating() && (a.on_tape() || b.on_tape());
}

}  // namespace

Scalar weighted_sum(const std::vector<std::pair<double, Scalar>>& terms, double constant) {
  double value = constant;
  bool any = false;
  for (const auto& [w, s] : terms) {
    value += w * s.value();
    any = any || s.on_tape();
  }
  Tape& tape = working_tape();
  if (!any || !tape.annotating()) return Scalar(value);
  auto block = std::make_unique<tape_detail::SumBlock>();
  block->constant = constant;
  for (const auto& [w, s] : terms) {
    if (s.on_tape()) {
      block->inputs.push_back(scalar_var(tape, s));
      block->weights.push_back(w);
    } else {
      block->constant += w * s.value();
    }
  }
  const int out = tape.new_scalar(value);
  block->outputs = {out};
  tape.add_block(std::move(block));
  return Scalar(value, working_tape_ptr(), out);
}

Scalar operator+(const Scalar& a, const Scalar& b) { return weighted_sum({{1.0, a}, {1.0, b}}); }
Scalar operator-(const Scalar& a, const Scalar& b) { return weighted_sum({{1.0, a}, {-1.0, b}}); }
Scalar operator-(const Scalar& a) { return weighted_sum({{-1.0, a}}); }

Scalar operator*(const Scalar& a, const Scalar& b) {
  if (!a.on_tape()) return weighted_sum({{a.value(), b}});
  if (!b.on_tape()) return weighted_sum({{b.value(), a}});
  const double value = a.value() * b.value();
  if (!recording(a, b)) return Scalar(value);
  Tape& tape = working_tape();
  auto block = std::make_unique<tape_detail::ScalarBinaryBlock>(false);
  block->inputs = {scalar_var(tape, a), scalar_var(tape, b)};
  const int out = tape.new_scalar(value);
  block->outputs = {out};
  tape.add_block(std::move(block));
  return Scalar(value, working_tape_ptr(), out);
}

Scalar operator/(const Scalar& a, const Scalar& b) {
  if (b.value() == 0.0) throw Error("division of scalars by zero");
  if (!b.on_tape()) return weighted_sum({{1.0 / b.value(), a}});
  const double value = a.value() / b.value();
  if (!recording(a, b)) return Scalar(value);
  Tape& tape = working_tape();
  auto block = std::make_unique<tape_detail::ScalarBinaryBlock>(true);
  const int ia = scalar_var(tape, a);
  const int ib = scalar_var(tape, b);
  block->inputs = {ia, ib};
  const int out = tape.new_scalar(value);
  block->outputs = {out};
  tape.add_block(std::move(block));
  return Scalar(value, working_tape_ptr(), out);
}

Scalar& Scalar::operator+=(const Scalar& o) { return *this = *this + o; }
Scalar& Scalar::operator-=(const Scalar& o) { return *this = *this - o; }
Scalar& Scalar::operator*=(const Scalar& o) { return *this = *this * o; }

}  // namespace shapead
