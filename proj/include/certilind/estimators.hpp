#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "certilind/fockspace.hpp"
#include "certilind/lindblad.hpp"
#include "certilind/linalg.hpp"
#include "certilind/operators.hpp"

namespace certilind {

// ---------------------------------------------------------------------------
// Ledger.

enum class LedgerKind { space_defect, shrink_jump, init_projection, time_taylor, time_euler };

inline const char* to_string(LedgerKind k) {
  switch (k) {
    case LedgerKind::space_defect: return "space_defect";
    case LedgerKind::shrink_jump: return "shrink_jump";
    case LedgerKind::init_projection: return "init_projection";
    case LedgerKind::time_taylor: return "time_taylor";
    case LedgerKind::time_euler: return "time_euler";
  }
  return "?";
}

struct LedgerEntry {
  double time;
  LedgerKind kind;
  double value;
};

struct EstimatorLedger {
  double xi = 0.0;
  std::vector<LedgerEntry> breakdown;

  void add(double t, LedgerKind kind, double value) {
    if (!(value >= 0.0) || !std::isfinite(value)) throw NumericalError("ledger values must be finite and non-negative");
    breakdown.push_back({t, kind, value});
    xi += value;
  }
  double total(LedgerKind kind) const {
    double s = 0.0;
    for (const auto& e : breakdown)
      if (e.kind == kind) s += e.value;
    return s;
  }
};

/// Rectangle rule at the accepted endpoint.
inline EstimatorLedger& xi_step(EstimatorLedger& ledger, double t_new, double defect_at_new_state, double dt) {
  if (!(dt > 0.0)) throw NumericalError("xi_step needs a positive step");
  ledger.add(t_new, LedgerKind::space_defect, dt * defect_at_new_state);
  return ledger;
}

inline double global_time_bound(const std::vector<double>& per_step) {
  double s = 0.0;
  for (double v : per_step) s += v;
  return s;
}

// ---------------------------------------------------------------------------
// Unitary tools.

/// ||P_1^perp U M||_1 for M supported on shape_2 and shape_1 inside shape_2,
/// from the exact block P_1 U P_2:  tr sqrt(M^dag (Id_2 - U_12^dag U_12) M).
inline double unitary_offblock_norm_block(const Matrix& u12, const Matrix& m) {
  Matrix gram = Matrix::Identity(u12.cols(), u12.cols()) - u12.adjoint() * u12;
  return trace_sqrt_psd(m.adjoint() * gram * m);
}

inline double unitary_offblock_norm(const DenseOperator& u_small, const DenseOperator& m, const TruncationShape& shape1) {
  if (!(u_small.shape == m.shape)) throw ShapeError("U and M must share a shape");
  auto where = embedding_indices(shape1, u_small.shape);
  Matrix u12(where.size(), u_small.dimension());
  for (std::size_t r = 0; r < where.size(); ++r) u12.row(r) = u_small.m.row(where[r]);
  return unitary_offblock_norm_block(u12, m.m);
}

/// Bound on ||(D_U - D_{U_N}) rho_N||_1 for a unitary U; `tr rho` replaces 1.
inline double unitary_dissipator_bound(const DenseOperator& u_n, const DenseOperator& rho) {
  const Matrix& u = u_n.m;
  const Matrix& r = rho.m;
  Matrix id = Matrix::Identity(u.rows(), u.cols());
  double a = 2.0 * trace_norm_general((id - u.adjoint() * u) * r);
  double b = unitary_offblock_norm_block(u, r * u.adjoint());
  double c = r.trace().real() - (u * r * u.adjoint()).trace().real();
  return a + b + std::max(c, 0.0);
}

// ---------------------------------------------------------------------------
// GKP and cosine estimators on a fixed shape.

class GkpEstimator {
 public:
  GkpEstimator(const GkpGamma& g, const TruncationShape& shape) : g_(g), shape_(shape) {
    if (!shape.is_rect() || shape.mode_count() != 1) throw ShapeError("gkp estimator needs a single-mode rectangular shape");
    auto s1 = grow(shape, std::vector<int>{1});
    auto s2 = grow(shape, std::vector<int>{2});
    const auto n = static_cast<Eigen::Index>(shape.dimension());
    PolyOperator qpoly = (PolyOperator::identity(1) - PolyOperator::momentum(1, 0) * cd(g.eps)) * cd(g.A);
    q_ = Matrix(materialize_sparse(qpoly, s1, shape));
    u_ = unitary_block(DisplacementQ{g.eta, 0}, shape, s1);
    an_ = u_ * q_;
    an_dag_an_ = an_.adjoint() * an_;
    qdq_ = Matrix(materialize_sparse(qpoly.adjoint() * qpoly, s2, shape));
    emb2_ = embedding_indices(shape, s2);
    gram_u_ = Matrix::Identity(s1.dimension(), s1.dimension()) - u_.adjoint() * u_;
    PolyOperator shifted = PolyOperator::identity(1) * cd(1.0 + g.eps * g.eta) - PolyOperator::momentum(1, 0) * cd(g.eps);
    b_ = Matrix(materialize_sparse(shifted, s1, shape));
    Matrix v = unitary_block(DisplacementQ{g.eta, 0}, s1, shape).adjoint();  // P e^{-i eta q} P_1
    gram_v_ = Matrix::Identity(s1.dimension(), s1.dimension()) - v.adjoint() * v;
    rot_ = rotation_diagonal(shape, g.k);
    (void)n;
  }

  /// f evaluated at R^{-k} rho R^k.
  double operator()(const Matrix& rho) const {
    Matrix r = rot_.conjugate().asDiagonal() * rho * rot_.asDiagonal();
    return f(r);
  }

  /// The five-term bound for Gamma_0 at a (rotated) state.
  double f(const Matrix& rho) const {
    Matrix qrq = q_ * rho * q_.adjoint();
    double t1 = qrq.trace().real() - (u_ * qrq * u_.adjoint()).trace().real();
    Matrix m2 = qrq * u_.adjoint();
    double t2 = 2.0 * trace_sqrt_psd(m2.adjoint() * gram_u_ * m2);
    Matrix a2 = qdq_ * rho;
    Matrix inner = an_dag_an_ * rho;
    for (std::size_t c = 0; c < emb2_.size(); ++c)
      for (std::size_t r = 0; r < emb2_.size(); ++r) a2(emb2_[r], c) -= inner(r, c);
    double t3 = trace_norm_general(a2);
    Matrix m4 = q_ * rho;
    double t4 = trace_sqrt_psd(m4.adjoint() * gram_u_ * m4);
    Matrix m5 = b_ * rho;
    double t5 = g_.A * trace_sqrt_psd(m5.adjoint() * gram_v_ * m5);
    return std::max(t1, 0.0) + t2 + t3 + t4 + t5;
  }

 private:
  GkpGamma g_;
  TruncationShape shape_;
  Matrix q_, u_, an_, an_dag_an_, qdq_, gram_u_, b_, gram_v_;
  std::vector<std::size_t> emb2_;
  Eigen::VectorXcd rot_;
};

inline double gkp_defect_bound(double A, double eta, double eps, const DenseOperator& rho) {
  double total = 0.0;
  for (int k = 0; k < 4; ++k) total += GkpEstimator(GkpGamma{k, A, eta, eps}, rho.shape)(rho.m);
  return total;
}

/// sqrt(sum_{k >= kmin} |<n+k|D(beta)|n>|^2) for |beta| = r, from
/// |<n+k|D|n>| <= (r sqrt(n+k))^k / k!  (Laguerre bound e^{x/2} binom(n+k, n)).
inline double displacement_column_tail(double r, int n, int kmin) {
  if (r == 0.0) return 0.0;
  const double ratio = r * std::sqrt(n + kmin + 1.0) * std::exp(0.5) / (kmin + 1.0);
  if (ratio >= 1.0) return std::numeric_limits<double>::infinity();
  const double log_t = kmin * (std::log(r) + 0.5 * std::log(n + static_cast<double>(kmin))) - std::lgamma(kmin + 1.0);
  return std::exp(log_t) / (1.0 - ratio);
}

/// ||(cos O - (cos O)_N) rho||_1.  Single-mode arguments use the off-block
/// rows of cos O directly plus a tail bound for the rows left out; otherwise
/// 1/2 tr sqrt(rho W rho) with W = 2 Id - A^dag A - A A^dag + CB + (CB)^dag,
/// CB = (U^2)_N - A^2, A = U_N.
class CosineEstimator {
 public:
  CosineEstimator(const LinearQuadrature& o, const TruncationShape& shape) {
    if (shape.is_rect() && shape.mode_count() == 1 && o.mode_count() == 1) {
      const cd beta = o.betas(1.0)[0];
      const double r = std::abs(beta);
      const int n = shape.max_occupation(0);
      int extra = 1;
      while (displacement_column_tail(r, n, extra) > 1e-30 || r * std::sqrt(n + extra + 1.0) * std::exp(0.5) / (extra + 1.0) > 0.5)
        ++extra;
      Matrix c = 0.5 * (displacement_elements(beta, n + extra, n) + displacement_elements(-beta, n + extra, n));
      rows_ = c.bottomRows(extra);
      double t2 = 0.0;
      for (int j = 0; j <= n; ++j) t2 += std::pow(displacement_column_tail(r, j, n + extra + 1 - j), 2);
      tail_ = std::sqrt(t2);
      direct_ = true;
      return;
    }
    Matrix a = displacement_block(shape, shape, o.betas(1.0));
    Matrix u2 = displacement_block(shape, shape, o.betas(2.0));
    Matrix cb = u2 - a * a;
    const auto n = a.rows();
    w_ = 2.0 * Matrix::Identity(n, n) - a.adjoint() * a - a * a.adjoint() + cb + cb.adjoint();
  }
  double operator()(const Matrix& rho) const {
    if (direct_) return trace_norm_general(rows_ * rho) + tail_ * trace_norm_general(rho);
    return 0.5 * trace_sqrt_psd(rho.adjoint() * w_ * rho);
  }

 private:
  bool direct_ = false;
  Matrix rows_, w_;
  double tail_ = 0.0;
};

inline double cosine_defect(const LinearQuadrature& o, const DenseOperator& rho) {
  return CosineEstimator(o, rho.shape)(rho.m);
}

// ---------------------------------------------------------------------------
// Space defect ||(L - L_N) rho_N||_1.

class DefectEvaluator {
 public:
  DefectEvaluator(const LindbladModel& model, TruncationShape shape) : shape_(std::move(shape)), big_(shape_) {
    model.validate();
    polynomial_ = model.is_polynomial();
    if (polynomial_) build_polynomial(model);
    else build_special(model);
  }

  const TruncationShape& shape() const { return shape_; }
  const TruncationShape& grown() const { return big_; }

  double operator()(double t, const Matrix& rho) const {
    if (!polynomial_) {
      double s = 0.0;
      for (const auto& g : gkp_) s += g(rho);
      for (const auto& [coeff, est] : cos_) s += 2.0 * std::abs(coeff(t)) * est(rho);
      return s;
    }
    if (trivial_) return 0.0;
    Matrix d = defect_matrix(t, rho);
    return trace_norm_hermitian_sparse_block(d, in_small_);
  }

  /// (L_G - L_N) rho on the grown shape, built from the off-shape parts only.
  Matrix defect_matrix(double t, const Matrix& rho) const {
    const auto n = static_cast<Eigen::Index>(big_.dimension());
    Matrix r = embed_matrix(rho, where_, big_.dimension());
    bool herm = hermitian_;
    std::vector<cd> u;
    for (const auto& h : h_) {
      u.push_back(h.coeff(t));
      if (u.back().imag() != 0.0) herm = false;
    }
    Matrix d;
    if (herm) {
      // every term of z vanishes outside the rows in rows_
      const auto k = static_cast<Eigen::Index>(rows_.size());
      Matrix z = Matrix::Zero(k, n);
      for (std::size_t j = 0; j < h_.size(); ++j)
        if (h_[j].e.nonZeros()) z += (cd(0.0, -1.0) * u[j]) * (h_[j].e_rows * r);
      for (const auto& g : g_) {
        if (!g.e.nonZeros()) continue;
        Matrix er = g.e_rows * r;
        Matrix ert = er.adjoint();
        z += (g.f * ert).adjoint() + 0.5 * (g.e * ert).adjoint();
      }
      if (w_.nonZeros()) z -= 0.5 * (w_rows_ * r);
      d = Matrix::Zero(n, n);
      for (Eigen::Index i = 0; i < k; ++i) d.row(rows_[i]) += z.row(i);
      for (Eigen::Index i = 0; i < k; ++i) d.col(rows_[i]) += z.row(i).adjoint();
    } else {
      d = Matrix::Zero(n, n);
      for (std::size_t k = 0; k < h_.size(); ++k)
        if (h_[k].e.nonZeros()) d += (cd(0.0, -1.0) * u[k]) * (h_[k].e * r - r * h_[k].e);
      for (const auto& g : g_) {
        if (!g.e.nonZeros()) continue;
        Matrix er = g.e * r;
        Matrix x = er * g.f.adjoint();
        d += x + x.adjoint() + er * g.e.adjoint();
      }
      if (w_.nonZeros()) d -= 0.5 * (w_ * r + r * w_);
    }
    return d;
  }

 private:
  void build_polynomial(const LindbladModel& model) {
    big_ = grown_shape(model, shape_);
    where_ = embedding_indices(shape_, big_);
    in_small_.assign(big_.dimension(), false);
    for (auto i : where_) in_small_[i] = true;
    trivial_ = big_ == shape_;
    if (trivial_) return;
    hermitian_ = true;
    auto lifted = [&](const PolyOperator& p) {
      SparseMatrix small = materialize_sparse(p, shape_);
      std::vector<Eigen::Triplet<cd>> trips;
      for (int k = 0; k < small.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(small, k); it; ++it)
          trips.emplace_back(static_cast<int>(where_[it.row()]), static_cast<int>(where_[it.col()]), it.value());
      SparseMatrix out(big_.dimension(), big_.dimension());
      out.setFromTriplets(trips.begin(), trips.end());
      return out;
    };
    for (const auto& h : model.hamiltonian) {
      const auto& p = std::get<PolyOperator>(h.op);
      SparseMatrix e = SparseMatrix(materialize_sparse(p, big_) - lifted(p));
      e.prune(cd(0.0));
      Matrix ed(e);
      if (ed.size() && (ed - ed.adjoint()).cwiseAbs().maxCoeff() > 1e-14 * ed.cwiseAbs().maxCoeff()) hermitian_ = false;
      h_.push_back({h.coeff, e, {}});
    }
    w_ = SparseMatrix(big_.dimension(), big_.dimension());
    for (const auto& dexpr : model.dissipators) {
      const auto& p = std::get<PolyOperator>(dexpr);
      SparseMatrix f = lifted(p);
      SparseMatrix e = SparseMatrix(materialize_sparse(p, big_) - f);
      e.prune(cd(0.0));
      SparseMatrix fa = f.adjoint(), ea = e.adjoint();
      w_ += SparseMatrix(fa * e) + SparseMatrix(ea * f) + SparseMatrix(ea * e);
      g_.push_back({f, e, {}});
    }
    w_.prune(cd(0.0));
    std::vector<bool> used(big_.dimension(), false);
    auto mark = [&](const SparseMatrix& m) {
      for (int c = 0; c < m.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(m, c); it; ++it) used[it.row()] = true;
    };
    for (const auto& h : h_) mark(h.e);
    for (const auto& g : g_) mark(g.e);
    mark(w_);
    for (std::size_t i = 0; i < used.size(); ++i)
      if (used[i]) rows_.push_back(static_cast<Eigen::Index>(i));
    std::vector<Eigen::Triplet<cd>> trips;
    for (std::size_t i = 0; i < rows_.size(); ++i) trips.emplace_back(static_cast<int>(i), static_cast<int>(rows_[i]), cd(1.0));
    SparseMatrix pick(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(big_.dimension()));
    pick.setFromTriplets(trips.begin(), trips.end());
    for (auto& h : h_) h.e_rows = pick * h.e;
    for (auto& g : g_) g.e_rows = pick * g.e;
    w_rows_ = pick * w_;
  }

  void build_special(const LindbladModel& model) {
    for (const auto& d : model.dissipators) gkp_.emplace_back(std::get<GkpGamma>(d), shape_);
    for (const auto& h : model.hamiltonian) cos_.emplace_back(h.coeff, CosineEstimator(std::get<CosineArg>(h.op).o, shape_));
  }

  struct HTerm {
    CoefficientFn coeff;
    SparseMatrix e, e_rows;
  };
  struct GTerm {
    SparseMatrix f, e, e_rows;
  };

  TruncationShape shape_, big_;
  bool polynomial_ = true, trivial_ = false, hermitian_ = true;
  std::vector<std::size_t> where_;
  std::vector<bool> in_small_;
  std::vector<HTerm> h_;
  std::vector<GTerm> g_;
  SparseMatrix w_, w_rows_;
  std::vector<Eigen::Index> rows_;
  std::vector<GkpEstimator> gkp_;
  std::vector<std::pair<CoefficientFn, CosineEstimator>> cos_;
};

inline double space_defect_generic(const LindbladModel& model, double t, const DenseOperator& rho) {
  if (!model.is_polynomial()) throw ModelError("generic space defect requires a polynomial model");
  return DefectEvaluator(model, rho.shape)(t, rho.m);
}

/// Any model: generic path for polynomials, specialised bounds otherwise.
inline double space_defect(const LindbladModel& model, double t, const DenseOperator& rho) {
  return DefectEvaluator(model, rho.shape)(t, rho.m);
}

// ---------------------------------------------------------------------------
// Closed forms.

namespace detail {
inline int single_mode_cap(const TruncationShape& s) {
  if (!s.is_rect() || s.mode_count() != 1) throw ShapeError("closed forms need a single-mode rectangular shape");
  return s.rect_caps().caps[0];
}
/// <i| rho^2 |j> for Hermitian rho.
inline cd rho2(const Matrix& rho, int i, int j) { return rho.row(j).dot(rho.row(i)); }
}  // namespace detail

/// H = u (a + a^dag):  2|u| sqrt(N+1) sqrt(<N|rho^2|N>).
inline double defect_drive_closed_form(cd u, const DenseOperator& rho) {
  const int n = detail::single_mode_cap(rho.shape);
  return 2.0 * std::abs(u) * std::sqrt(n + 1.0) * std::sqrt(std::max(0.0, detail::rho2(rho.m, n, n).real()));
}

/// Gamma = a^2 - alpha^2 Id.  The defect is alpha^2 ||X||_1 with
/// X = sqrt((N+1)(N+2)) |N+2><N| rho + sqrt(N(N+1)) |N+1><N-1| rho, whose
/// Gram matrix X X^dag is 2x2.
inline double defect_cat_closed_form(double alpha, const DenseOperator& rho) {
  const int n = detail::single_mode_cap(rho.shape);
  const double c2 = std::sqrt((n + 1.0) * (n + 2.0));
  const double c1 = std::sqrt(n * (n + 1.0));
  const double g22 = c2 * c2 * detail::rho2(rho.m, n, n).real();
  double g11 = 0.0;
  cd g12 = 0.0;
  if (n >= 1) {
    g11 = c1 * c1 * detail::rho2(rho.m, n - 1, n - 1).real();
    g12 = c1 * c2 * detail::rho2(rho.m, n - 1, n);
  }
  const double tr = g11 + g22;
  const double det = std::max(0.0, g11 * g22 - std::norm(g12));
  return alpha * alpha * std::sqrt(std::max(0.0, tr + 2.0 * std::sqrt(det)));
}

/// ||(D_Gamma - D_{Gamma_N}) rho_N||_1 from the blocks d_N = (Gamma - Gamma_N) P_N,
/// g_N = Gamma_N^dag (Gamma - Gamma_N), k_N = (Gamma^dag - Gamma_N^dag)(Gamma - Gamma_N)
/// realized on the shape grown by the dissipator's own margin.
inline double dissipator_defect_blocks(const PolyOperator& gamma, const DenseOperator& rho) {
  LindbladModel m;
  m.modes = gamma.mode_count();
  m.dissipators.push_back(gamma);
  auto big = grown_shape(m, rho.shape);
  auto where = embedding_indices(rho.shape, big);
  const auto nb = static_cast<Eigen::Index>(big.dimension());
  Matrix gbig = Matrix(materialize_sparse(gamma, big));
  Matrix gn = embed_matrix(Matrix(materialize_sparse(gamma, rho.shape)), where, big.dimension());
  Matrix p = Matrix::Zero(nb, nb);
  for (auto i : where) p(i, i) = 1.0;
  Matrix r = embed_matrix(rho.m, where, big.dimension());
  Matrix dn = (gbig - gn) * p;
  Matrix g = gn.adjoint() * (gbig - gn);
  Matrix k = (gbig - gn).adjoint() * (gbig - gn);
  // Gamma rho Gamma^dag - Gamma_N rho Gamma_N^dag
  Matrix jump = dn * r * gn.adjoint() + gn * r * dn.adjoint() + dn * r * dn.adjoint();
  // Gamma^dag Gamma - Gamma_N^dag Gamma_N on rho_N
  Matrix anti = (g + g.adjoint() + k) * r;
  Matrix d = jump - 0.5 * (anti + anti.adjoint());
  return trace_norm_hermitian(d);
}

// ---------------------------------------------------------------------------
// Time-discretization bounds.

/// One-step bound for the order-k Taylor scheme.  With `closed` the working
/// shape is taken as the whole space, so only the remainder survives.
inline double taylor_step_bound(const LindbladModel& model, const DenseOperator& rho, double dt, int k, bool closed = false) {
  if (k < 1) throw ModelError("Taylor order must be at least 1");
  if (!model.time_invariant()) throw ModelError("Taylor bound requires a time-invariant model");
  double fact = 1.0;
  for (int j = 2; j <= k + 1; ++j) fact *= j;
  if (closed) {
    TruncatedGenerator gen(model, rho.shape);
    Matrix x = rho.m;
    for (int j = 0; j <= k; ++j) x = gen.apply_general(0.0, x);
    return std::pow(dt, k + 1) / fact * trace_norm_hermitian(x);
  }
  if (!model.is_polynomial()) throw ModelError("Taylor bound requires a polynomial model");
  auto big = grown_shape(model, rho.shape, k + 1);
  auto where = embedding_indices(rho.shape, big);
  TruncatedGenerator gbig(model, big), gsmall(model, rho.shape);
  Matrix xb = embed_matrix(rho.m, where, big.dimension());
  Matrix xs = rho.m;
  Matrix acc = Matrix::Zero(xb.rows(), xb.cols());
  double coef = 1.0;
  for (int j = 1; j <= k; ++j) {
    xb = gbig.apply_general(0.0, xb);
    xs = gsmall.apply_general(0.0, xs);
    coef *= dt / j;
    acc += coef * (xb - embed_matrix(xs, where, big.dimension()));
  }
  xb = gbig.apply_general(0.0, xb);
  return trace_norm_hermitian(acc) + std::pow(dt, k + 1) / fact * trace_norm_hermitian(xb);
}

/// One-step bound for explicit Euler with time-dependent coefficients.
inline double euler_timedep_step_bound(const LindbladModel& model, const DenseOperator& rho, double t_n, double dt) {
  if (!model.is_polynomial()) throw ModelError("Euler bound requires a polynomial model");
  LindbladModel steady;
  steady.modes = model.modes;
  steady.dissipators = model.dissipators;
  std::vector<LindbladModel> driven;
  std::vector<const CoefficientFn*> coeffs;
  for (const auto& h : model.hamiltonian) {
    if (h.coeff.constant) {
      steady.hamiltonian.push_back(h);
      continue;
    }
    if (!h.coeff.sup_norm_bound || !h.coeff.derivative_sup_bound)
      throw ModelError("time-dependent coefficient '" + h.coeff.source + "' lacks sup/dsup bounds");
    LindbladModel one;
    one.modes = model.modes;
    one.hamiltonian.push_back({CoefficientFn::constant_value(1.0), h.op});
    driven.push_back(std::move(one));
    coeffs.push_back(&h.coeff);
  }
  auto g1 = grown_shape(model, rho.shape, 1);
  auto g2 = grown_shape(model, rho.shape, 2);
  Matrix r1 = embed_matrix(rho.m, embedding_indices(rho.shape, g1), g1.dimension());
  double first = 0.0, second = 0.0;
  for (std::size_t k = 0; k < driven.size(); ++k) {
    TruncatedGenerator lk(driven[k], g1);
    first += *coeffs[k]->derivative_sup_bound * trace_norm_hermitian(lk.apply_general(0.0, r1));
  }
  TruncatedGenerator full(model, g1);
  Matrix x = full.apply_general(t_n, r1);
  Matrix x2 = embed_matrix(x, embedding_indices(g1, g2), g2.dimension());
  for (std::size_t k = 0; k < driven.size(); ++k) {
    TruncatedGenerator lk(driven[k], g2);
    second += *coeffs[k]->sup_norm_bound * trace_norm_hermitian(lk.apply_general(0.0, x2));
  }
  TruncatedGenerator ld(steady, g2);
  second += trace_norm_hermitian(ld.apply_general(0.0, x2));
  double defect = space_defect_generic(model, t_n, rho);
  return dt * dt * first + 0.5 * dt * dt * second + dt * defect;
}

}  // namespace certilind
