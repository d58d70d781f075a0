#include "shapead/assemble.hpp"

#include <cmath>
#include <unordered_map>

#include "shapead/error.hpp"
#include "shapead/quadrature.hpp"

namespace shapead {

namespace {

inline int ncomp_of(int rank) { return rank == 0 ? 1 : (rank == 1 ? 2 : 4); }

// Component-wise evaluation of a compound node. `ra`, `rb` are the operand ranks.
inline void component_op(Op op, int ra, int rb, int idx, const double* A, const double* B, double* O) {
  switch (op) {
    case Op::Add:
      for (int k = 0; k < ncomp_of(ra); ++k) O[k] = A[k] + B[k];
      return;
    case Op::Sub:
      for (int k = 0; k < ncomp_of(ra); ++k) O[k] = A[k] - B[k];
      return;
    case Op::Mul:
      for (int k = 0; k < ncomp_of(rb); ++k) O[k] = A[0] * B[k];
      return;
    case Op::Divide:
      for (int k = 0; k < ncomp_of(ra); ++k) O[k] = A[k] / B[0];
      return;
    case Op::Inner: {
      double s = 0.0;
      for (int k = 0; k < ncomp_of(ra); ++k) s += A[k] * B[k];
      O[0] = s;
      return;
    }
    case Op::Dot:
      if (ra == 1 && rb == 1) {
        O[0] = A[0] * B[0] + A[1] * B[1];
      } else if (ra == 1 && rb == 2) {
        O[0] = A[0] * B[0] + A[1] * B[2];
        O[1] = A[0] * B[1] + A[1] * B[3];
      } else if (ra == 2 && rb == 1) {
        O[0] = A[0] * B[0] + A[1] * B[1];
        O[1] = A[2] * B[0] + A[3] * B[1];
      } else {
        O[0] = A[0] * B[0] + A[1] * B[2];
        O[1] = A[0] * B[1] + A[1] * B[3];
        O[2] = A[2] * B[0] + A[3] * B[2];
        O[3] = A[2] * B[1] + A[3] * B[3];
      }
      return;
    case Op::Outer:
      O[0] = A[0] * B[0];
      O[1] = A[0] * B[1];
      O[2] = A[1] * B[0];
      O[3] = A[1] * B[1];
      return;
    case Op::Power: O[0] = std::pow(A[0], B[0]); return;
    case Op::Sin: O[0] = std::sin(A[0]); return;
    case Op::Cos: O[0] = std::cos(A[0]); return;
    case Op::Exp: O[0] = std::exp(A[0]); return;
    case Op::Ln: O[0] = std::log(A[0]); return;
    case Op::Sqrt: O[0] = std::sqrt(A[0]); return;
    case Op::Det: O[0] = A[0] * A[3] - A[1] * A[2]; return;
    case Op::Transpose:
      O[0] = A[0];
      O[1] = A[2];
      O[2] = A[1];
      O[3] = A[3];
      return;
    case Op::Trace: O[0] = A[0] + A[3]; return;
    case Op::Indexed:
      if (ra == 1) {
        O[0] = A[idx];
      } else {
        O[0] = A[2 * idx];
        O[1] = A[2 * idx + 1];
      }
      return;
    case Op::ListTensor: {
      const int n = ncomp_of(ra);
      for (int k = 0; k < n; ++k) {
        O[k] = A[k];
        O[n + k] = B[k];
      }
      return;
    }
    default: throw AssemblyError("internal: not a compound node");
  }
}

// Scalar Lagrange basis on the reference triangle at given points.
struct Tabulation {
  int nloc = 0;
  std::vector<double> phi;   // [q][k]
  std::vector<double> dphi;  // [q][k][2], reference gradients
};

Tabulation tabulate(int degree, const std::vector<std::array<double, 2>>& pts) {
  Tabulation t;
  t.nloc = degree == 1 ? 3 : 6;
  const int nq = static_cast<int>(pts.size());
  t.phi.resize(nq * t.nloc);
  t.dphi.resize(nq * t.nloc * 2);
  const double gl[3][2] = {{-1.0, -1.0}, {1.0, 0.0}, {0.0, 1.0}};
  for (int q = 0; q < nq; ++q) {
    const double l[3] = {1.0 - pts[q][0] - pts[q][1], pts[q][0], pts[q][1]};
    double* p = &t.phi[q * t.nloc];
    double* d = &t.dphi[q * t.nloc * 2];
    if (degree == 1) {
      for (int k = 0; k < 3; ++k) {
        p[k] = l[k];
        d[2 * k] = gl[k][0];
        d[2 * k + 1] = gl[k][1];
      }
    } else {
      for (int k = 0; k < 3; ++k) {
        p[k] = l[k] * (2.0 * l[k] - 1.0);
        d[2 * k] = (4.0 * l[k] - 1.0) * gl[k][0];
        d[2 * k + 1] = (4.0 * l[k] - 1.0) * gl[k][1];
      }
      for (int k = 0; k < 3; ++k) {
        const int a = (k + 1) % 3, b = (k + 2) % 3;
        p[3 + k] = 4.0 * l[a] * l[b];
        d[2 * (3 + k)] = 4.0 * (l[b] * gl[a][0] + l[a] * gl[b][0]);
        d[2 * (3 + k) + 1] = 4.0 * (l[b] * gl[a][1] + l[a] * gl[b][1]);
      }
    }
  }
  return t;
}

struct CellGeometry {
  double x0[2];
  double J[2][2];
  double K[2][2];  // inverse of J
  double det;
};

CellGeometry geometry(const Mesh& mesh, int cell) {
  const auto& v = mesh.cells()[cell];
  const auto& p0 = mesh.vertices()[v[0]];
  const auto& p1 = mesh.vertices()[v[1]];
  const auto& p2 = mesh.vertices()[v[2]];
  CellGeometry g;
  g.x0[0] = p0[0];
  g.x0[1] = p0[1];
  g.J[0][0] = p1[0] - p0[0];
  g.J[0][1] = p2[0] - p0[0];
  g.J[1][0] = p1[1] - p0[1];
  g.J[1][1] = p2[1] - p0[1];
  g.det = g.J[0][0] * g.J[1][1] - g.J[0][1] * g.J[1][0];
  g.K[0][0] = g.J[1][1] / g.det;
  g.K[0][1] = -g.J[0][1] / g.det;
  g.K[1][0] = -g.J[1][0] / g.det;
  g.K[1][1] = g.J[0][0] / g.det;
  return g;
}

enum class Terminal { None, Argument, Coefficient };

struct Slot {
  Op op;
  int rank = 0;
  int nc = 1;
  bool test = false, trial = false;
  int ni = 1, nj = 1;
  bool varying = true;
  int a = -1, b = -1;
  int ra = 0, rb = 0;
  int idx = -1;
  double value = 0.0;
  // Argument / Coefficient terminals (possibly under Grad or Div).
  Terminal terminal = Terminal::None;
  Op deriv = Op::Zero;  // Zero (value), Grad or Div
  int degree = 1;
  int elem_rank = 0;
  int base = 0;  // local offset of the sub-space
  int coeff = -1;
  std::vector<double> buf;
};

struct Program {
  std::vector<Slot> slots;
  int root = -1;
  bool uses_x = false;
  bool uses_normal = false;
  bool needs_degree[3] = {false, false, false};
};

class Compiler {
 public:
  Compiler(Program& p, const std::shared_ptr<Mesh>& mesh, std::vector<FunctionPtr>& coeffs, int NI, int NJ)
      : p_(p), mesh_(mesh), coeffs_(coeffs), NI_(NI), NJ_(NJ) {}

  int compile(const Expr& e) {
    if (auto it = memo_.find(e.get()); it != memo_.end()) return it->second;
    const Node& n = e.node();
    Slot s;
    s.op = n.op;
    s.rank = n.rank;
    s.nc = ncomp_of(n.rank);
    switch (n.op) {
      case Op::Argument:
      case Op::Coefficient:
        terminal(s, e, Op::Zero);
        break;
      case Op::Grad:
      case Op::Div:
        terminal(s, n.children[0], n.op);
        break;
      case Op::SpatialCoordinate:
        p_.uses_x = true;
        break;
      case Op::FacetNormal:
        p_.uses_normal = true;
        break;
      case Op::Constant:
      case Op::Identity:
      case Op::Zero:
        s.value = n.value;
        s.varying = false;
        break;
      default: {
        s.a = compile(n.children[0]);
        if (n.children.size() > 1) s.b = compile(n.children[1]);
        s.idx = n.index;
        const Slot& A = p_.slots[s.a];
        s.ra = A.rank;
        s.test = A.test;
        s.trial = A.trial;
        s.varying = A.varying;
        if (s.b >= 0) {
          const Slot& B = p_.slots[s.b];
          s.rb = B.rank;
          s.varying = s.varying || B.varying;
          check_flags(n.op, A, B, n.children[0], n.children[1]);
          s.test = A.test || B.test;
          s.trial = A.trial || B.trial;
        } else if (n.op != Op::Transpose && n.op != Op::Trace && n.op != Op::Indexed && (A.test || A.trial)) {
          throw AssemblyError(std::string("argument inside a nonlinear operation: ") + to_string(e));
        }
      }
    }
    s.ni = s.test ? NI_ : 1;
    s.nj = s.trial ? NJ_ : 1;
    s.buf.assign(static_cast<std::size_t>(s.ni) * s.nj * s.nc, 0.0);
    p_.slots.push_back(std::move(s));
    const int id = static_cast<int>(p_.slots.size()) - 1;
    memo_.emplace(e.get(), id);
    return id;
  }

 private:
  void terminal(Slot& s, const Expr& t, Op deriv) {
    const Node& n = t.node();
    SpacePtr space = n.op == Op::Argument ? n.space : n.function->space();
    if (space->mesh() != mesh_) throw AssemblyError("form uses a function on a different mesh");
    const int sub = n.sub < 0 ? 0 : n.sub;
    const Element& el = space->element(sub);
    s.deriv = deriv;
    s.degree = el.degree;
    s.elem_rank = el.rank;
    s.base = space->local_sub_offset(sub);
    p_.needs_degree[el.degree] = true;
    if (n.op == Op::Argument) {
      s.terminal = Terminal::Argument;
      if (n.index == 0) s.test = true;
      else s.trial = true;
    } else {
      s.terminal = Terminal::Coefficient;
      for (std::size_t k = 0; k < coeffs_.size(); ++k)
        if (coeffs_[k]->id() == n.function->id()) s.coeff = static_cast<int>(k);
      if (s.coeff < 0) {
        coeffs_.push_back(n.function);
        s.coeff = static_cast<int>(coeffs_.size()) - 1;
      }
    }
  }

  void check_flags(Op op, const Slot& A, const Slot& B, const Expr& ea, const Expr& eb) {
    switch (op) {
      case Op::Add:
      case Op::Sub:
        if (A.test != B.test || A.trial != B.trial) {
          throw AssemblyError("sum of terms with different arguments: " + to_string(ea) + " and " + to_string(eb));
        }
        return;
      case Op::ListTensor: {
        const bool test = A.test || B.test, trial = A.trial || B.trial;
        if (((A.test != test || A.trial != trial) && !ea.is_zero()) ||
            ((B.test != test || B.trial != trial) && !eb.is_zero())) {
          throw AssemblyError("vector components with different arguments");
        }
        return;
      }
      case Op::Mul:
      case Op::Inner:
      case Op::Dot:
      case Op::Outer:
        if ((A.test && B.test) || (A.trial && B.trial)) {
          throw AssemblyError("product of two factors depending on the same argument");
        }
        return;
      case Op::Divide:
        if (B.test || B.trial) throw AssemblyError("division by an argument");
        return;
      default:
        if (A.test || A.trial || B.test || B.trial) throw AssemblyError("argument inside a nonlinear operation");
        return;
    }
  }

  Program& p_;
  std::shared_ptr<Mesh> mesh_;
  std::vector<FunctionPtr>& coeffs_;
  int NI_, NJ_;
  std::unordered_map<const Node*, int> memo_;
};

// Everything needed to evaluate a program at the points of one cell or facet.
struct PointContext {
  const CellGeometry* g;
  const double* xq;                 // physical point
  const double* normal;             // facet normal or nullptr
  const double* phi[3];             // per degree, [k]
  const double* grad[3];            // per degree, physical gradients [k][2]
  const std::vector<std::vector<double>>* coeff_dofs;
};

void eval_terminal(Slot& s, const PointContext& c) {
  const int nloc = s.degree == 1 ? 3 : 6;
  const double* phi = c.phi[s.degree];
  const double* gr = c.grad[s.degree];
  double* out = s.buf.data();
  if (s.terminal == Terminal::Argument) {
    std::fill(s.buf.begin(), s.buf.end(), 0.0);
    if (s.elem_rank == 0) {
      for (int k = 0; k < nloc; ++k) {
        const int l = s.base + k;
        if (s.deriv == Op::Zero) {
          out[l] = phi[k];
        } else {
          out[2 * l] = gr[2 * k];
          out[2 * l + 1] = gr[2 * k + 1];
        }
      }
    } else {
      for (int comp = 0; comp < 2; ++comp) {
        for (int k = 0; k < nloc; ++k) {
          const int l = s.base + comp * nloc + k;
          if (s.deriv == Op::Zero) {
            out[2 * l + comp] = phi[k];
          } else if (s.deriv == Op::Grad) {
            out[4 * l + 2 * comp] = gr[2 * k];
            out[4 * l + 2 * comp + 1] = gr[2 * k + 1];
          } else {
            out[l] = gr[2 * k + comp];
          }
        }
      }
    }
    return;
  }
  const double* u = (*c.coeff_dofs)[s.coeff].data() + s.base;
  if (s.elem_rank == 0) {
    if (s.deriv == Op::Zero) {
      double v = 0.0;
      for (int k = 0; k < nloc; ++k) v += u[k] * phi[k];
      out[0] = v;
    } else {
      double g0 = 0.0, g1 = 0.0;
      for (int k = 0; k < nloc; ++k) {
        g0 += u[k] * gr[2 * k];
        g1 += u[k] * gr[2 * k + 1];
      }
      out[0] = g0;
      out[1] = g1;
    }
    return;
  }
  if (s.deriv == Op::Zero) {
    for (int comp = 0; comp < 2; ++comp) {
      double v = 0.0;
      for (int k = 0; k < nloc; ++k) v += u[comp * nloc + k] * phi[k];
      out[comp] = v;
    }
  } else if (s.deriv == Op::Grad) {
    for (int comp = 0; comp < 2; ++comp) {
      double g0 = 0.0, g1 = 0.0;
      for (int k = 0; k < nloc; ++k) {
        g0 += u[comp * nloc + k] * gr[2 * k];
        g1 += u[comp * nloc + k] * gr[2 * k + 1];
      }
      out[2 * comp] = g0;
      out[2 * comp + 1] = g1;
    }
  } else {
    double d = 0.0;
    for (int comp = 0; comp < 2; ++comp)
      for (int k = 0; k < nloc; ++k) d += u[comp * nloc + k] * gr[2 * k + comp];
    out[0] = d;
  }
}

void eval_compound(Program& p, Slot& s) {
  const Slot& A = p.slots[s.a];
  const Slot* B = s.b >= 0 ? &p.slots[s.b] : nullptr;
  for (int i = 0; i < s.ni; ++i) {
    for (int j = 0; j < s.nj; ++j) {
      const double* pa = A.buf.data() + ((A.test ? i : 0) * A.nj + (A.trial ? j : 0)) * A.nc;
      const double* pb =
          B ? B->buf.data() + ((B->test ? i : 0) * B->nj + (B->trial ? j : 0)) * B->nc : nullptr;
      component_op(s.op, s.ra, s.rb, s.idx, pa, pb, s.buf.data() + (i * s.nj + j) * s.nc);
    }
  }
}

void eval_fixed(Slot& s) {
  switch (s.op) {
    case Op::Constant: s.buf[0] = s.value; break;
    case Op::Identity: s.buf = {1.0, 0.0, 0.0, 1.0}; break;
    default: std::fill(s.buf.begin(), s.buf.end(), 0.0); break;
  }
}

void run(Program& p, const PointContext& c) {
  for (auto& s : p.slots) {
    if (!s.varying) continue;
    if (s.terminal != Terminal::None) {
      eval_terminal(s, c);
    } else if (s.op == Op::SpatialCoordinate) {
      s.buf[0] = c.xq[0];
      s.buf[1] = c.xq[1];
    } else if (s.op == Op::FacetNormal) {
      if (!c.normal) throw AssemblyError("facet normal used in a cell integral");
      s.buf[0] = c.normal[0];
      s.buf[1] = c.normal[1];
    } else {
      eval_compound(p, s);
    }
  }
}

void prepare_fixed(Program& p) {
  for (auto& s : p.slots) {
    if (s.varying) continue;
    if (s.a < 0) eval_fixed(s);
    else eval_compound(p, s);
  }
}

struct PointSet {
  std::vector<std::array<double, 2>> ref;
  std::vector<double> weights;
  Tabulation tab[3];
};

// Output sink: accumulates element tensors.
struct Sink {
  int arity;
  const FunctionSpace* test = nullptr;
  const FunctionSpace* trial = nullptr;
  double scalar = 0.0;
  Eigen::VectorXd vec;
  std::vector<Eigen::Triplet<double>> triplets;
};

void assemble_integral(const Form& form, const Integral& integral, Sink& sink) {
  const auto& mesh = form.mesh();
  const int NI = sink.test ? sink.test->local_dim() : 1;
  const int NJ = sink.trial ? sink.trial->local_dim() : 1;
  const int degree = resolved_degree(integral);
  if (degree > kMaxQuadratureDegree) {
    throw AssemblyError("quadrature degree " + std::to_string(degree) + " exceeds the supported maximum of 8");
  }

  Program prog;
  std::vector<FunctionPtr> coeffs;
  Compiler compiler(prog, mesh, coeffs, NI, NJ);
  prog.root = compiler.compile(integral.integrand);
  {
    const Slot& r = prog.slots[prog.root];
    if (r.rank != 0) throw AssemblyError("integrand must be scalar-valued");
    if (r.test != (sink.arity >= 1) || r.trial != (sink.arity >= 2)) {
      throw AssemblyError("integrand arguments do not match the form arity");
    }
  }
  prepare_fixed(prog);

  // Point sets: one for cells, three (one per local edge) for facets.
  std::vector<PointSet> sets;
  std::vector<double> facet_weights;
  if (integral.kind == IntegralKind::Cell) {
    const auto& rule = triangle_rule(degree);
    sets.resize(1);
    sets[0].ref = rule.points;
    sets[0].weights = rule.weights;
  } else {
    const auto& rule = line_rule(degree);
    const double ref[3][2] = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    sets.resize(3);
    for (int e = 0; e < 3; ++e) {
      const int a = (e + 1) % 3, b = (e + 2) % 3;
      for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const double t = rule.points[q];
        sets[e].ref.push_back({ref[a][0] + t * (ref[b][0] - ref[a][0]), ref[a][1] + t * (ref[b][1] - ref[a][1])});
      }
      sets[e].weights = rule.weights;
    }
  }
  for (auto& s : sets)
    for (int d = 1; d <= 2; ++d)
      if (prog.needs_degree[d]) s.tab[d] = tabulate(d, s.ref);

  std::vector<std::vector<double>> coeff_dofs(coeffs.size());
  std::vector<int> dof_scratch;
  for (std::size_t k = 0; k < coeffs.size(); ++k) coeff_dofs[k].resize(coeffs[k]->space()->local_dim());

  std::vector<double> grads[3];
  std::vector<double> element(static_cast<std::size_t>(NI) * NJ);
  std::vector<int> test_dofs(NI), trial_dofs(NJ);
  const Slot& root = prog.slots[prog.root];

  auto process = [&](int cell, const PointSet& set, double scale, const double* normal) {
    const CellGeometry g = geometry(*mesh, cell);
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
      const auto& sp = *coeffs[k]->space();
      dof_scratch.resize(sp.local_dim());
      sp.cell_dofs(cell, dof_scratch);
      const auto& u = coeffs[k]->dofs();
      for (int l = 0; l < sp.local_dim(); ++l) coeff_dofs[k][l] = u[dof_scratch[l]];
    }
    const int nq = static_cast<int>(set.ref.size());
    for (int d = 1; d <= 2; ++d) {
      if (!prog.needs_degree[d]) continue;
      const Tabulation& t = set.tab[d];
      grads[d].resize(nq * t.nloc * 2);
      for (int q = 0; q < nq; ++q) {
        for (int k = 0; k < t.nloc; ++k) {
          const double r0 = t.dphi[(q * t.nloc + k) * 2], r1 = t.dphi[(q * t.nloc + k) * 2 + 1];
          grads[d][(q * t.nloc + k) * 2] = g.K[0][0] * r0 + g.K[1][0] * r1;
          grads[d][(q * t.nloc + k) * 2 + 1] = g.K[0][1] * r0 + g.K[1][1] * r1;
        }
      }
    }
    std::fill(element.begin(), element.end(), 0.0);
    PointContext ctx{};
    ctx.g = &g;
    ctx.normal = normal;
    ctx.coeff_dofs = &coeff_dofs;
    double xq[2];
    ctx.xq = xq;
    for (int q = 0; q < nq; ++q) {
      xq[0] = g.x0[0] + g.J[0][0] * set.ref[q][0] + g.J[0][1] * set.ref[q][1];
      xq[1] = g.x0[1] + g.J[1][0] * set.ref[q][0] + g.J[1][1] * set.ref[q][1];
      for (int d = 1; d <= 2; ++d) {
        if (!prog.needs_degree[d]) continue;
        const int nl = set.tab[d].nloc;
        ctx.phi[d] = set.tab[d].phi.data() + q * nl;
        ctx.grad[d] = grads[d].data() + q * nl * 2;
      }
      run(prog, ctx);
      const double w = set.weights[q] * scale;
      const double* r = root.buf.data();
      for (std::size_t k = 0; k < element.size(); ++k) element[k] += w * r[k];
    }
    switch (sink.arity) {
      case 0: sink.scalar += element[0]; break;
      case 1:
        sink.test->cell_dofs(cell, test_dofs);
        for (int i = 0; i < NI; ++i) sink.vec[test_dofs[i]] += element[i];
        break;
      default:
        sink.test->cell_dofs(cell, test_dofs);
        sink.trial->cell_dofs(cell, trial_dofs);
        for (int i = 0; i < NI; ++i)
          for (int j = 0; j < NJ; ++j) sink.triplets.emplace_back(test_dofs[i], trial_dofs[j], element[i * NJ + j]);
    }
  };

  if (integral.kind == IntegralKind::Cell) {
    for (int c = 0; c < mesh->num_cells(); ++c) {
      const double det = geometry(*mesh, c).det;
      process(c, sets[0], std::abs(det), nullptr);
    }
  } else {
    for (const auto& f : mesh->facets_with_tags(integral.tags)) {
      const auto& verts = mesh->cells()[f.cell];
      const auto& pa = mesh->vertices()[verts[(f.local_edge + 1) % 3]];
      const auto& pb = mesh->vertices()[verts[(f.local_edge + 2) % 3]];
      const double dx = pb[0] - pa[0], dy = pb[1] - pa[1];
      const double len = std::hypot(dx, dy);
      const double normal[2] = {dy / len, -dx / len};
      process(f.cell, sets[f.local_edge], len, normal);
    }
  }
}

SpacePtr pick_space(const Form& form, int number, const SpacePtr& hint) {
  SpacePtr s = form.argument_space(number);
  if (!s) s = hint;
  if (!s) throw AssemblyError("cannot determine the argument space of an empty form");
  if (hint && s != hint && s->dim() != hint->dim()) throw AssemblyError("argument space does not match");
  return s;
}

void check_mesh(const Form& form) {
  if (!form.empty() && !form.mesh()) throw AssemblyError("form has no mesh");
}

}  // namespace

double assemble_scalar(const Form& form) {
  check_mesh(form);
  if (form.arity() != 0) throw AssemblyError("assemble_scalar needs a form without arguments");
  Sink sink;
  sink.arity = 0;
  for (const auto& i : form.integrals()) assemble_integral(form, i, sink);
  return sink.scalar;
}

Eigen::VectorXd assemble_vector(const Form& form, const SpacePtr& test_space) {
  check_mesh(form);
  if (!form.empty() && form.arity() != 1) throw AssemblyError("assemble_vector needs a linear form");
  const SpacePtr test = pick_space(form, 0, test_space);
  Sink sink;
  sink.arity = 1;
  sink.test = test.get();
  sink.vec = Eigen::VectorXd::Zero(test->dim());
  for (const auto& i : form.integrals()) assemble_integral(form, i, sink);
  return sink.vec;
}

SparseMatrix assemble_matrix(const Form& form, const SpacePtr& test_space, const SpacePtr& trial_space) {
  check_mesh(form);
  if (!form.empty() && form.arity() != 2) throw AssemblyError("assemble_matrix needs a bilinear form");
  const SpacePtr test = pick_space(form, 0, test_space);
  const SpacePtr trial = pick_space(form, 1, trial_space);
  Sink sink;
  sink.arity = 2;
  sink.test = test.get();
  sink.trial = trial.get();
  for (const auto& i : form.integrals()) assemble_integral(form, i, sink);
  SparseMatrix A(test->dim(), trial->dim());
  A.setFromTriplets(sink.triplets.begin(), sink.triplets.end());
  return A;
}

std::vector<double> evaluate_at(const Expr& e, const Point& x) {
  const Node& n = e.node();
  switch (n.op) {
    case Op::Constant: return {n.value};
    case Op::Zero: return std::vector<double>(ncomp_of(n.rank), 0.0);
    case Op::Identity: return {1.0, 0.0, 0.0, 1.0};
    case Op::SpatialCoordinate: return {x[0], x[1]};
    case Op::Argument:
    case Op::Coefficient:
    case Op::Grad:
    case Op::Div:
    case Op::FacetNormal:
      throw FormError("point evaluation supports constants and functions of the spatial coordinate only");
    default: break;
  }
  const std::vector<double> a = evaluate_at(n.children[0], x);
  std::vector<double> b;
  int rb = 0;
  if (n.children.size() > 1) {
    b = evaluate_at(n.children[1], x);
    rb = n.children[1].rank();
  }
  std::vector<double> out(ncomp_of(n.rank));
  component_op(n.op, n.children[0].rank(), rb, n.index, a.data(), b.empty() ? nullptr : b.data(), out.data());
  return out;
}

void interpolate(const Expr& e, Function& f, int sub) {
  const auto& space = *f.space();
  if (e.rank() != space.element(sub).rank) throw FormError("interpolated expression has the wrong rank");
  for (const auto& loc : space.dof_locations(sub)) f.dofs()[loc.dof] = evaluate_at(e, loc.x)[loc.component];
}

std::vector<double> evaluate_function(const Function& f, int cell, const Point& x, int sub) {
  const auto& space = *f.space();
  const auto& mesh = *space.mesh();
  const CellGeometry g = geometry(mesh, cell);
  const double rx = x[0] - g.x0[0], ry = x[1] - g.x0[1];
  const std::array<double, 2> ref = {g.K[0][0] * rx + g.K[0][1] * ry, g.K[1][0] * rx + g.K[1][1] * ry};
  const Element& el = space.element(sub);
  const Tabulation t = tabulate(el.degree, {ref});
  std::vector<int> dofs(space.local_dim());
  space.cell_dofs(cell, dofs);
  const int base = space.local_sub_offset(sub);
  const int ncomp = el.rank == 0 ? 1 : 2;
  std::vector<double> out(ncomp, 0.0);
  for (int c = 0; c < ncomp; ++c)
    for (int k = 0; k < t.nloc; ++k) out[c] += f.dofs()[dofs[base + c * t.nloc + k]] * t.phi[k];
  return out;
}

std::vector<double> vertex_values(const Function& f, int sub) {
  const auto& space = *f.space();
  if (space.is_boundary()) throw FormError("vertex values need a space on a mesh");
  const Element& el = space.element(sub);
  const int nv = space.mesh()->num_vertices();
  const int nscalar = el.degree == 1 ? nv : nv + space.mesh()->num_edges();
  const int ncomp = el.rank == 0 ? 1 : 2;
  std::vector<double> out(static_cast<std::size_t>(nv) * ncomp);
  for (int c = 0; c < ncomp; ++c)
    for (int v = 0; v < nv; ++v) out[c * nv + v] = f.dofs()[space.sub_offset(sub) + c * nscalar + v];
  return out;
}

}  // namespace shapead
