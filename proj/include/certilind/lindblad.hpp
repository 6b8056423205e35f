#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "certilind/expression.hpp"
#include "certilind/fockspace.hpp"
#include "certilind/linalg.hpp"
#include "certilind/operators.hpp"

namespace certilind {

/// Scalar time dependence u(t) with optional interval bounds on |u| and |u'|.
struct CoefficientFn {
  std::function<cd(double)> eval = [](double) { return cd(1.0); };
  std::optional<double> sup_norm_bound;
  std::optional<double> derivative_sup_bound;
  bool constant = true;
  std::string source = "1";
  std::vector<std::pair<double, double>> table_points;

  cd operator()(double t) const { return eval(t); }

  static CoefficientFn constant_value(cd v) {
    CoefficientFn c;
    c.eval = [v](double) { return v; };
    c.sup_norm_bound = std::abs(v);
    c.derivative_sup_bound = 0.0;
    c.constant = true;
    std::ostringstream os;
    os.precision(17);
    if (v.imag() == 0.0) os << v.real();
    else os << "(" << v.real() << ")+(" << v.imag() << ")*i";
    c.source = os.str();
    return c;
  }

  static CoefficientFn expression(const std::string& src, const ParamTable& params, std::optional<double> sup,
                                  std::optional<double> dsup) {
    auto e = parse_scalar(src, params);
    CoefficientFn c;
    c.eval = e.fn;
    c.constant = !e.time_dependent;
    c.source = src;
    c.sup_norm_bound = sup;
    c.derivative_sup_bound = dsup;
    if (c.constant) {
      c.sup_norm_bound = std::abs(e.fn(0.0));
      c.derivative_sup_bound = 0.0;
    }
    return c;
  }

  /// Piecewise-constant: value v_i on [t_i, t_{i+1}); v_0 before t_0.
  static CoefficientFn table(std::vector<std::pair<double, double>> points) {
    if (points.empty()) throw ModelError("coefficient table is empty");
    std::sort(points.begin(), points.end());
    CoefficientFn c;
    c.eval = [points](double t) {
      double v = points.front().second;
      for (const auto& [ti, vi] : points)
        if (t >= ti) v = vi;
      return cd(v);
    };
    double sup = 0.0;
    bool flat = true;
    for (const auto& p : points) {
      sup = std::max(sup, std::abs(p.second));
      if (p.second != points.front().second) flat = false;
    }
    c.sup_norm_bound = sup;
    c.constant = flat;
    if (flat) c.derivative_sup_bound = 0.0;
    c.source = "table";
    c.table_points = points;
    return c;
  }
};

/// Gamma_k = R^k (A e^{i eta q}(Id - eps p) - Id) R^{-k}.
struct GkpGamma {
  int k = 0;
  double A = 1.0;
  double eta = 0.0;
  double eps = 0.0;
};

/// cos(O) for a real linear combination O of quadratures.
struct CosineArg {
  LinearQuadrature o;
};

using OperatorExpr = std::variant<PolyOperator, GkpGamma, CosineArg>;

struct HamiltonianTerm {
  CoefficientFn coeff;
  OperatorExpr op;
};

struct LindbladModel {
  int modes = 1;
  ParamTable params;
  std::vector<HamiltonianTerm> hamiltonian;
  std::vector<OperatorExpr> dissipators;

  bool is_polynomial() const {
    for (const auto& h : hamiltonian)
      if (!std::holds_alternative<PolyOperator>(h.op)) return false;
    for (const auto& d : dissipators)
      if (!std::holds_alternative<PolyOperator>(d)) return false;
    return true;
  }

  bool time_invariant() const {
    return std::all_of(hamiltonian.begin(), hamiltonian.end(), [](const HamiltonianTerm& h) { return h.coeff.constant; });
  }

  void validate() const {
    if (modes < 1) throw ModelError("model needs at least one mode");
    bool poly = false, special = false;
    auto visit = [&](const OperatorExpr& e, bool in_h) {
      if (const auto* p = std::get_if<PolyOperator>(&e)) {
        poly = true;
        if (p->mode_count() != modes) throw ModelError("operator mode count differs from model");
      } else if (const auto* g = std::get_if<GkpGamma>(&e)) {
        special = true;
        if (in_h) throw ModelError("gkp expressions are only valid as dissipators");
        if (modes != 1) throw ModelError("gkp dissipators require a single-mode model");
        (void)g;
      } else {
        special = true;
        if (!in_h) throw ModelError("cosine expressions are only valid as Hamiltonian terms");
        if (std::get<CosineArg>(e).o.mode_count() != modes) throw ModelError("cosine argument mode count differs from model");
      }
    };
    for (const auto& h : hamiltonian) visit(h.op, true);
    for (const auto& d : dissipators) visit(d, false);
    if (poly && special)
      throw ModelError("polynomial terms cannot be mixed with gkp/cosine terms in one model");
  }
};

// ---------------------------------------------------------------------------
// Growth margins.

struct GrowthMargin {
  /// max(d_H, 2 max d_Gamma) from total degrees.
  int degree = 0;
  /// Tight per-mode margin from the net occupation shifts of the words.
  std::vector<int> per_mode;
};

namespace detail {

struct ShiftRange {
  std::vector<int> raise, lower;  // per mode, >= 0
  Rational wraise{0}, wlower{0};  // weighted
};

inline ShiftRange shift_range(const PolyOperator& p, const std::vector<Rational>* weights) {
  ShiftRange r;
  r.raise.assign(p.mode_count(), 0);
  r.lower.assign(p.mode_count(), 0);
  for (const auto& s : p.word_shifts()) {
    Rational w(0);
    for (int j = 0; j < p.mode_count(); ++j) {
      r.raise[j] = std::max(r.raise[j], s[j]);
      r.lower[j] = std::max(r.lower[j], -s[j]);
      if (weights) w += (*weights)[j] * s[j];
    }
    if (weights) {
      r.wraise = std::max(r.wraise, w);
      r.wlower = std::max(r.wlower, -w);
    }
  }
  return r;
}

inline const PolyOperator& require_poly(const OperatorExpr& e) {
  const auto* p = std::get_if<PolyOperator>(&e);
  if (!p) throw ModelError("operation requires a polynomial model");
  return *p;
}

}  // namespace detail

inline int degree_margin(const LindbladModel& model) {
  int dh = 0, dg = 0;
  for (const auto& h : model.hamiltonian) dh = std::max(dh, detail::require_poly(h.op).degree());
  for (const auto& d : model.dissipators) dg = std::max(dg, detail::require_poly(d).degree());
  return std::max(dh, 2 * dg);
}

inline GrowthMargin growth_margin(const LindbladModel& model) {
  GrowthMargin g;
  g.degree = degree_margin(model);
  g.per_mode.assign(model.modes, 0);
  for (const auto& h : model.hamiltonian) {
    auto r = detail::shift_range(detail::require_poly(h.op), nullptr);
    for (int j = 0; j < model.modes; ++j) g.per_mode[j] = std::max({g.per_mode[j], r.raise[j], r.lower[j]});
  }
  for (const auto& d : model.dissipators) {
    auto r = detail::shift_range(detail::require_poly(d), nullptr);
    for (int j = 0; j < model.modes; ++j) g.per_mode[j] = std::max(g.per_mode[j], r.raise[j] + r.lower[j]);
  }
  return g;
}

inline Rational weighted_margin(const LindbladModel& model, const std::vector<Rational>& weights) {
  Rational m(0);
  for (const auto& h : model.hamiltonian) {
    auto r = detail::shift_range(detail::require_poly(h.op), &weights);
    m = std::max({m, r.wraise, r.wlower});
  }
  for (const auto& d : model.dissipators) {
    auto r = detail::shift_range(detail::require_poly(d), &weights);
    m = std::max(m, r.wraise + r.wlower);
  }
  return m;
}

/// Enlargement of `shape` that makes L(rho_N) = L_{grown}(rho_N), scaled by `times`.
inline ShapeStep margin_step(const LindbladModel& model, const TruncationShape& shape, int times = 1) {
  if (shape.is_rect()) {
    auto g = growth_margin(model).per_mode;
    for (auto& v : g) v *= times;
    return g;
  }
  return weighted_margin(model, shape.weighted_cap().weights) * Rational(times);
}

inline TruncationShape grown_shape(const LindbladModel& model, const TruncationShape& shape, int times = 1) {
  return grow(shape, margin_step(model, shape, times));
}

// ---------------------------------------------------------------------------
// Operator matrices on a shape.

/// Sparse or dense complex matrix with the products the generator needs.
struct OpMatrix {
  bool dense = false;
  SparseMatrix sp;
  Matrix de;

  static OpMatrix from_sparse(SparseMatrix s) {
    OpMatrix o;
    o.sp = std::move(s);
    return o;
  }
  static OpMatrix from_dense(Matrix d) {
    OpMatrix o;
    o.dense = true;
    o.de = std::move(d);
    return o;
  }
  Eigen::Index rows() const { return dense ? de.rows() : sp.rows(); }
  Matrix to_dense() const { return dense ? de : Matrix(sp); }
  /// op * x
  Matrix left(const Matrix& x) const { return dense ? Matrix(de * x) : Matrix(sp * x); }
  /// x * op^dag
  Matrix right_adj(const Matrix& x) const { return dense ? Matrix(x * de.adjoint()) : Matrix((sp * x.adjoint()).adjoint()); }
  /// x * op
  Matrix right(const Matrix& x) const { return dense ? Matrix(x * de) : Matrix(x * sp); }
  bool is_hermitian() const {
    Matrix d = to_dense();
    double scale = d.size() ? d.cwiseAbs().maxCoeff() : 0.0;
    return scale == 0.0 || (d - d.adjoint()).cwiseAbs().maxCoeff() <= 1e-14 * scale;
  }
};

/// Exact truncation P (Gamma_0)_k P for the GKP dissipator on a Rect shape.
inline Matrix gkp_gamma_matrix(const GkpGamma& g, const TruncationShape& shape) {
  if (!shape.is_rect() || shape.mode_count() != 1) throw ShapeError("gkp dissipators need a single-mode rectangular shape");
  auto s1 = grow(shape, std::vector<int>{1});
  PolyOperator qpoly = (PolyOperator::identity(1) - PolyOperator::momentum(1, 0) * cd(g.eps)) * cd(g.A);
  Matrix q = Matrix(materialize_sparse(qpoly, s1, shape));
  Matrix u = unitary_block(DisplacementQ{g.eta, 0}, shape, s1);
  Matrix gamma = u * q - Matrix::Identity(shape.dimension(), shape.dimension());
  Eigen::VectorXcd r = rotation_diagonal(shape, g.k);
  // R^k G R^{-k}
  return r.asDiagonal() * gamma * r.conjugate().asDiagonal();
}

inline OpMatrix hamiltonian_matrix(const OperatorExpr& e, const TruncationShape& shape) {
  if (const auto* p = std::get_if<PolyOperator>(&e)) return OpMatrix::from_sparse(materialize_sparse(*p, shape));
  if (const auto* c = std::get_if<CosineArg>(&e)) return OpMatrix::from_dense(cosine_of(c->o, shape).m);
  throw ModelError("expression is not valid as a Hamiltonian term");
}

inline OpMatrix dissipator_matrix(const OperatorExpr& e, const TruncationShape& shape) {
  if (const auto* p = std::get_if<PolyOperator>(&e)) return OpMatrix::from_sparse(materialize_sparse(*p, shape));
  if (const auto* g = std::get_if<GkpGamma>(&e)) return OpMatrix::from_dense(gkp_gamma_matrix(*g, shape));
  throw ModelError("expression is not valid as a dissipator");
}

/// L_N on a fixed shape, with the operator matrices cached.
class TruncatedGenerator {
 public:
  TruncatedGenerator(const LindbladModel& model, TruncationShape shape) : shape_(std::move(shape)) {
    model.validate();
    const auto n = static_cast<Eigen::Index>(shape_.dimension());
    hermitian_terms_ = true;
    for (const auto& h : model.hamiltonian) {
      terms_.push_back({h.coeff, hamiltonian_matrix(h.op, shape_)});
      hermitian_terms_ = hermitian_terms_ && terms_.back().op.is_hermitian();
    }
    bool any_dense = false;
    for (const auto& d : model.dissipators) {
      gammas_.push_back(dissipator_matrix(d, shape_));
      any_dense = any_dense || gammas_.back().dense;
    }
    if (any_dense) {
      Matrix k = Matrix::Zero(n, n);
      for (const auto& g : gammas_) {
        Matrix gd = g.to_dense();
        k += gd.adjoint() * gd;
      }
      k_ = OpMatrix::from_dense(k);
    } else {
      SparseMatrix k(n, n);
      for (const auto& g : gammas_) k += SparseMatrix(g.sp.adjoint() * g.sp);
      k_ = OpMatrix::from_sparse(k);
    }
    time_invariant_ = model.time_invariant();
    if (time_invariant_) {
      for (const auto& term : terms_)
        if (term.coeff(0.0).imag() != 0.0) hermitian_terms_ = false;
      cached_drift_ = drift(0.0);
    }
  }

  const TruncationShape& shape() const { return shape_; }

  /// L_N(t, rho) for arbitrary rho.
  Matrix apply_general(double t, const Matrix& rho) const {
    Matrix out = Matrix::Zero(rho.rows(), rho.cols());
    for (const auto& term : terms_) {
      cd u = term.coeff(t);
      if (u == cd(0.0)) continue;
      out += cd(0.0, -1.0) * u * (term.op.left(rho) - term.op.right(rho));
    }
    for (const auto& g : gammas_) out += g.left(g.right_adj(rho));
    out -= 0.5 * (k_.left(rho) + k_.right(rho));
    return out;
  }

  /// L_N(t, rho) for Hermitian rho; the result is exactly Hermitian.
  Matrix apply(double t, const Matrix& rho) const {
    if (!hermitian_terms_) return apply_general(t, rho);
    Matrix y;
    if (time_invariant_) {
      y = cached_drift_.left(rho);
    } else {
      for (const auto& term : terms_)
        if (term.coeff(t).imag() != 0.0) return apply_general(t, rho);
      y = drift(t).left(rho);
    }
    for (const auto& g : gammas_) y += 0.5 * g.left(g.right_adj(rho));
    return y + y.adjoint();
  }

 private:
  // -i H(t) - K/2
  OpMatrix drift(double t) const {
    const auto n = static_cast<Eigen::Index>(shape_.dimension());
    bool dense = k_.dense;
    for (const auto& term : terms_) dense = dense || term.op.dense;
    if (dense) {
      Matrix d = -0.5 * k_.to_dense();
      for (const auto& term : terms_) d += cd(0.0, -1.0) * term.coeff(t) * term.op.to_dense();
      return OpMatrix::from_dense(d);
    }
    SparseMatrix d = cd(-0.5) * k_.sp;
    for (const auto& term : terms_) d += (cd(0.0, -1.0) * term.coeff(t)) * term.op.sp;
    d.prune(cd(0.0));
    (void)n;
    return OpMatrix::from_sparse(d);
  }

  struct Term {
    CoefficientFn coeff;
    OpMatrix op;
  };

  TruncationShape shape_;
  std::vector<Term> terms_;
  std::vector<OpMatrix> gammas_;
  OpMatrix k_;
  bool hermitian_terms_ = true;
  bool time_invariant_ = false;
  OpMatrix cached_drift_;
};

/// L_N(rho) on the state's own shape.
inline DenseOperator apply_truncated(const LindbladModel& model, double t, const DenseOperator& state) {
  TruncatedGenerator gen(model, state.shape);
  return DenseOperator(state.shape, gen.apply_general(t, state.m));
}

/// L(rho_N), realized exactly on the shape grown by the growth margin.
inline DenseOperator apply_exact_embedded(const LindbladModel& model, double t, const DenseOperator& state) {
  if (!model.is_polynomial()) throw ModelError("exact application requires a polynomial model");
  auto big = grown_shape(model, state.shape);
  auto rho = embed(state, big);
  TruncatedGenerator gen(model, big);
  return DenseOperator(big, gen.apply_general(t, rho.m));
}

/// Builds a multi-mode model from single-mode parts.  Each part's operators
/// act on consecutive modes of the result.
inline LindbladModel tensor_assemble(const std::vector<LindbladModel>& parts) {
  LindbladModel out;
  out.modes = 0;
  for (const auto& p : parts) out.modes += p.modes;
  int offset = 0;
  auto lift = [&](const PolyOperator& q) {
    PolyOperator r(out.modes);
    for (const auto& t : q.terms()) {
      PolyOperator w = PolyOperator::scalar(out.modes, t.coef);
      for (const auto& l : t.word) w = w * PolyOperator::letter(out.modes, l.mode + offset, l.dagger);
      r = r + w;
    }
    return r;
  };
  for (const auto& p : parts) {
    if (!p.is_polynomial()) throw ModelError("tensor assembly supports polynomial parts only");
    for (const auto& [k, v] : p.params) out.params[k] = v;
    for (const auto& h : p.hamiltonian) out.hamiltonian.push_back({h.coeff, lift(std::get<PolyOperator>(h.op))});
    for (const auto& d : p.dissipators) out.dissipators.push_back(lift(std::get<PolyOperator>(d)));
    offset += p.modes;
  }
  return out;
}

/// Soft density-matrix check; returns warnings, never modifies the state.
inline std::vector<std::string> check_density(const Matrix& rho, double expected_trace) {
  std::vector<std::string> warnings;
  double scale = std::max(1.0, rho.cwiseAbs().maxCoeff());
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale) warnings.push_back("state is not Hermitian");
  if (std::abs(rho.trace().real() - expected_trace) > 1e-8) warnings.push_back("trace drifted from its certified value");
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm_part(rho), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-8) warnings.push_back("state has a negative eigenvalue below -1e-8");
  return warnings;
}

}  // namespace certilind
