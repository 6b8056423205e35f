#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "certilind/errors.hpp"
#include "certilind/fockspace.hpp"
#include "certilind/linalg.hpp"

namespace certilind {

using SparseMatrix = Eigen::SparseMatrix<cd, Eigen::ColMajor>;

struct DenseOperator {
  TruncationShape shape;
  Matrix m;

  DenseOperator(TruncationShape s, Matrix mat) : shape(std::move(s)), m(std::move(mat)) {
    if (m.rows() != static_cast<Eigen::Index>(shape.dimension()) || m.cols() != m.rows())
      throw ShapeError("matrix size does not match shape " + shape.describe());
  }
  static DenseOperator zero(const TruncationShape& s) {
    auto n = static_cast<Eigen::Index>(s.dimension());
    return DenseOperator(s, Matrix::Zero(n, n));
  }
  static DenseOperator identity(const TruncationShape& s) {
    auto n = static_cast<Eigen::Index>(s.dimension());
    return DenseOperator(s, Matrix::Identity(n, n));
  }
  std::size_t dimension() const { return shape.dimension(); }
};

inline DenseOperator embed(const DenseOperator& op, const TruncationShape& big) {
  auto where = embedding_indices(op.shape, big);
  return DenseOperator(big, embed_matrix(op.m, where, big.dimension()));
}

/// P M P restricted to `small`, plus the trace norm of M - P M P.
inline std::pair<DenseOperator, double> project(const DenseOperator& op, const TruncationShape& small) {
  auto where = embedding_indices(small, op.shape);
  std::vector<bool> kept(op.shape.dimension(), false);
  for (auto i : where) kept[i] = true;
  Matrix tail = op.m;
  for (auto c : where)
    for (auto r : where) tail(r, c) = 0.0;
  double lost = tail.isZero(0.0) ? 0.0 : trace_norm_hermitian_sparse_block(tail, kept);
  return {DenseOperator(small, restrict_matrix(op.m, where)), lost};
}

inline double trace_norm(const DenseOperator& op) { return trace_norm(op.m); }
inline DenseOperator herm_part(const DenseOperator& op) { return DenseOperator(op.shape, herm_part(op.m)); }

// ---------------------------------------------------------------------------
// Polynomials in creation / annihilation operators.

struct Letter {
  int mode = 0;
  bool dagger = false;
  bool operator==(const Letter&) const = default;
  auto operator<=>(const Letter&) const = default;
};

/// Letters are applied right to left, as written.
using Word = std::vector<Letter>;

struct PolyTerm {
  cd coef;
  Word word;
};

class PolyOperator {
 public:
  PolyOperator() = default;
  explicit PolyOperator(int modes) : modes_(modes) {}

  static PolyOperator scalar(int modes, cd value) {
    PolyOperator p(modes);
    if (value != cd(0.0)) p.terms_.push_back({value, {}});
    return p;
  }
  static PolyOperator identity(int modes) { return scalar(modes, 1.0); }
  static PolyOperator letter(int modes, int mode, bool dagger) {
    if (mode < 0 || mode >= modes) throw ModelError("mode index " + std::to_string(mode) + " out of range");
    PolyOperator p(modes);
    p.terms_.push_back({1.0, {Letter{mode, dagger}}});
    return p;
  }
  static PolyOperator annihilation(int modes, int mode) { return letter(modes, mode, false); }
  static PolyOperator creation(int modes, int mode) { return letter(modes, mode, true); }
  static PolyOperator number(int modes, int mode) { return creation(modes, mode) * annihilation(modes, mode); }
  static PolyOperator position(int modes, int mode) {
    return (annihilation(modes, mode) + creation(modes, mode)) * cd(1.0 / std::sqrt(2.0));
  }
  static PolyOperator momentum(int modes, int mode) {
    return (annihilation(modes, mode) - creation(modes, mode)) * cd(0.0, -1.0 / std::sqrt(2.0));
  }

  int mode_count() const { return modes_; }
  const std::vector<PolyTerm>& terms() const { return terms_; }

  int degree() const {
    std::size_t d = 0;
    for (const auto& t : terms_) d = std::max(d, t.word.size());
    return static_cast<int>(d);
  }

  bool is_scalar() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const PolyTerm& t) { return t.word.empty(); });
  }
  cd scalar_value() const {
    cd v = 0.0;
    for (const auto& t : terms_) v += t.coef;
    return v;
  }

  PolyOperator adjoint() const {
    PolyOperator out(modes_);
    for (const auto& t : terms_) {
      Word w(t.word.rbegin(), t.word.rend());
      for (auto& l : w) l.dagger = !l.dagger;
      out.terms_.push_back({std::conj(t.coef), std::move(w)});
    }
    return out.simplified();
  }

  /// Merge identical words and drop zero coefficients.
  PolyOperator simplified() const {
    std::map<Word, cd> acc;
    std::vector<Word> order;
    for (const auto& t : terms_) {
      auto [it, fresh] = acc.emplace(t.word, 0.0);
      if (fresh) order.push_back(t.word);
      it->second += t.coef;
    }
    PolyOperator out(modes_);
    for (const auto& w : order)
      if (acc[w] != cd(0.0)) out.terms_.push_back({acc[w], w});
    return out;
  }

  friend PolyOperator operator+(const PolyOperator& x, const PolyOperator& y) {
    check_modes(x, y);
    PolyOperator out(x.modes_);
    out.terms_ = x.terms_;
    out.terms_.insert(out.terms_.end(), y.terms_.begin(), y.terms_.end());
    return out.simplified();
  }
  friend PolyOperator operator-(const PolyOperator& x) { return x * cd(-1.0); }
  friend PolyOperator operator-(const PolyOperator& x, const PolyOperator& y) { return x + (-y); }
  friend PolyOperator operator*(const PolyOperator& x, cd s) {
    PolyOperator out(x.modes_);
    for (const auto& t : x.terms_) out.terms_.push_back({t.coef * s, t.word});
    return out.simplified();
  }
  friend PolyOperator operator*(cd s, const PolyOperator& x) { return x * s; }
  friend PolyOperator operator*(const PolyOperator& x, const PolyOperator& y) {
    check_modes(x, y);
    PolyOperator out(x.modes_);
    for (const auto& tx : x.terms_)
      for (const auto& ty : y.terms_) {
        Word w = tx.word;
        w.insert(w.end(), ty.word.begin(), ty.word.end());
        out.terms_.push_back({tx.coef * ty.coef, std::move(w)});
      }
    return out.simplified();
  }
  PolyOperator pow(int n) const {
    if (n < 0) throw ModelError("negative operator power");
    PolyOperator out = identity(modes_);
    for (int i = 0; i < n; ++i) out = out * *this;
    return out;
  }

  bool operator==(const PolyOperator& o) const {
    if (modes_ != o.modes_ || terms_.size() != o.terms_.size()) return false;
    for (std::size_t i = 0; i < terms_.size(); ++i)
      if (terms_[i].coef != o.terms_[i].coef || terms_[i].word != o.terms_[i].word) return false;
    return true;
  }

  /// Net occupation change of each word, per mode.
  std::vector<std::vector<int>> word_shifts() const {
    std::vector<std::vector<int>> out;
    for (const auto& t : terms_) {
      std::vector<int> s(modes_, 0);
      for (const auto& l : t.word) s[l.mode] += l.dagger ? 1 : -1;
      out.push_back(std::move(s));
    }
    return out;
  }

 private:
  static void check_modes(const PolyOperator& x, const PolyOperator& y) {
    if (x.modes_ != y.modes_) throw ModelError("mode-count mismatch between operator expressions");
  }

  int modes_ = 1;
  std::vector<PolyTerm> terms_;
};

/// Acts with a word on a Fock state.  Returns the amplitude and the image
/// state, or nothing when the word annihilates the state.
inline std::optional<std::pair<double, MultiIndex>> act_word(const Word& w, MultiIndex k) {
  double amp = 1.0;
  for (auto it = w.rbegin(); it != w.rend(); ++it) {
    int& n = k[it->mode];
    if (it->dagger) {
      ++n;
      amp *= std::sqrt(static_cast<double>(n));
    } else {
      if (n == 0) return std::nullopt;
      amp *= std::sqrt(static_cast<double>(n));
      --n;
    }
  }
  return std::make_pair(amp, std::move(k));
}

/// Block P_rows Q P_cols of the untruncated polynomial.  Every word is applied
/// to the exact Fock state, so no intermediate truncation occurs.
inline SparseMatrix materialize_sparse(const PolyOperator& q, const TruncationShape& rows, const TruncationShape& cols) {
  if (q.mode_count() != rows.mode_count() || q.mode_count() != cols.mode_count())
    throw ShapeError("operator and shape have different mode counts");
  std::vector<Eigen::Triplet<cd>> trips;
  for (std::size_t c = 0; c < cols.dimension(); ++c) {
    const auto& k = cols.multi_index_of(c);
    for (const auto& t : q.terms()) {
      auto img = act_word(t.word, k);
      if (!img) continue;
      auto r = rows.find(img->second);
      if (!r) continue;
      trips.emplace_back(static_cast<int>(*r), static_cast<int>(c), t.coef * img->first);
    }
  }
  SparseMatrix out(static_cast<Eigen::Index>(rows.dimension()), static_cast<Eigen::Index>(cols.dimension()));
  out.setFromTriplets(trips.begin(), trips.end());
  out.prune(cd(0.0));
  return out;
}

inline SparseMatrix materialize_sparse(const PolyOperator& q, const TruncationShape& shape) {
  return materialize_sparse(q, shape, shape);
}

inline DenseOperator materialize_poly(const PolyOperator& q, const TruncationShape& shape) {
  return DenseOperator(shape, Matrix(materialize_sparse(q, shape)));
}

inline DenseOperator ladder(const TruncationShape& shape, int mode) {
  return materialize_poly(PolyOperator::annihilation(shape.mode_count(), mode), shape);
}

// ---------------------------------------------------------------------------
// Displacement-type unitaries.

/// <m|D(beta)|n> for 0 <= m <= mmax, 0 <= n <= nmax, D(beta) = exp(beta a^dag - conj(beta) a).
/// Uses the associated-Laguerre form with a normalized three-term recurrence
/// along each diagonal m - n = const.
inline Matrix displacement_elements(cd beta, int mmax, int nmax) {
  Matrix out = Matrix::Zero(mmax + 1, nmax + 1);
  const double r = std::abs(beta);
  if (r == 0.0) {
    for (int i = 0; i <= std::min(mmax, nmax); ++i) out(i, i) = 1.0;
    return out;
  }
  const double x = r * r;
  const cd phase = beta / r;
  // lower diagonals carry beta^k, upper ones (-conj beta)^k
  for (int side = 0; side < 2; ++side) {
    const cd ph = side == 0 ? phase : -std::conj(phase);
    const int kmax = side == 0 ? mmax : nmax;
    for (int k = side; k <= kmax; ++k) {
      const int len = side == 0 ? std::min(nmax, mmax - k) : std::min(mmax, nmax - k);
      if (len < 0) continue;
      double log_scale = k * std::log(r) - 0.5 * x - 0.5 * std::lgamma(k + 1.0);
      const cd ph_k = std::pow(ph, k);
      double prev = 0.0, cur = 1.0;
      for (int n = 0; n <= len; ++n) {
        const double mag = cur == 0.0 ? 0.0 : std::copysign(std::exp(log_scale + std::log(std::abs(cur))), cur);
        if (std::abs(mag) >= 1e-300) {
          if (side == 0) out(n + k, n) = ph_k * mag;
          else out(n, n + k) = ph_k * mag;
        }
        const double a = (2.0 * n + 1.0 + k - x) / std::sqrt((n + 1.0) * (n + k + 1.0));
        const double b = std::sqrt(n * (n + static_cast<double>(k)) / ((n + 1.0) * (n + k + 1.0)));
        double next = a * cur - b * prev;
        prev = cur;
        cur = next;
        const double big = std::max(std::abs(prev), std::abs(cur));
        if (big > 1e100 || (big < 1e-100 && big > 0.0)) {
          prev /= big;
          cur /= big;
          log_scale += std::log(big);
        }
      }
    }
  }
  return out;
}

/// Real linear combination O = sum_j (x_j q_j + y_j p_j).
struct LinearQuadrature {
  std::vector<double> q;
  std::vector<double> p;

  int mode_count() const { return static_cast<int>(q.size()); }
  bool is_zero() const {
    return std::all_of(q.begin(), q.end(), [](double v) { return v == 0.0; }) &&
           std::all_of(p.begin(), p.end(), [](double v) { return v == 0.0; });
  }
  /// exp(i s O) factorizes into displacements with these amplitudes.
  std::vector<cd> betas(double s = 1.0) const {
    std::vector<cd> out;
    for (std::size_t j = 0; j < q.size(); ++j) out.push_back(s * cd(-p[j], q[j]) / std::sqrt(2.0));
    return out;
  }
  PolyOperator as_poly() const {
    PolyOperator o(mode_count());
    for (int j = 0; j < mode_count(); ++j)
      o = o + PolyOperator::position(mode_count(), j) * cd(q[j]) + PolyOperator::momentum(mode_count(), j) * cd(p[j]);
    return o;
  }
  bool operator==(const LinearQuadrature&) const = default;
};

/// Block P_rows D P_cols of the multi-mode displacement prod_j D(beta_j).
inline Matrix displacement_block(const TruncationShape& rows, const TruncationShape& cols, const std::vector<cd>& betas) {
  const int m = rows.mode_count();
  if (static_cast<int>(betas.size()) != m || cols.mode_count() != m) throw ShapeError("displacement mode-count mismatch");
  std::vector<Matrix> per_mode;
  for (int j = 0; j < m; ++j) per_mode.push_back(displacement_elements(betas[j], rows.max_occupation(j), cols.max_occupation(j)));
  Matrix out(rows.dimension(), cols.dimension());
  for (std::size_t c = 0; c < cols.dimension(); ++c) {
    const auto& kc = cols.multi_index_of(c);
    for (std::size_t r = 0; r < rows.dimension(); ++r) {
      const auto& kr = rows.multi_index_of(r);
      cd v = 1.0;
      for (int j = 0; j < m && v != cd(0.0); ++j) v *= per_mode[j](kr[j], kc[j]);
      out(r, c) = v;
    }
  }
  return out;
}

inline std::vector<cd> single_mode_betas(int modes, int mode, cd beta) {
  if (mode < 0 || mode >= modes) throw ShapeError("mode index out of range");
  std::vector<cd> b(modes, 0.0);
  b[mode] = beta;
  return b;
}

/// Truncation of exp(i eta q_mode).
inline DenseOperator displacement_q(const TruncationShape& shape, double eta, int mode = 0) {
  auto b = single_mode_betas(shape.mode_count(), mode, cd(0.0, eta / std::sqrt(2.0)));
  return DenseOperator(shape, displacement_block(shape, shape, b));
}

/// R^k = exp(i k pi n/2) on one mode: diagonal i^{k n}.
inline DenseOperator rotation(const TruncationShape& shape, int k, int mode = 0) {
  static const cd powers[4] = {cd(1, 0), cd(0, 1), cd(-1, 0), cd(0, -1)};
  const int kk = ((k % 4) + 4) % 4;
  auto out = DenseOperator::zero(shape);
  for (std::size_t i = 0; i < shape.dimension(); ++i) {
    int n = shape.multi_index_of(i).at(mode);
    out.m(i, i) = powers[(kk * n) % 4];
  }
  return out;
}

inline Eigen::VectorXcd rotation_diagonal(const TruncationShape& shape, int k, int mode = 0) {
  return rotation(shape, k, mode).m.diagonal();
}

struct DisplacementQ {
  double eta = 0.0;
  int mode = 0;
};
struct Rotation {
  int k = 0;
  int mode = 0;
};
struct QuadratureExp {
  LinearQuadrature o;
  double scale = 1.0;
};

using UnitarySpec = std::variant<DisplacementQ, Rotation, QuadratureExp>;

/// Exact block P_rows U P_cols.
inline Matrix unitary_block(const UnitarySpec& u, const TruncationShape& rows, const TruncationShape& cols) {
  return std::visit(
      [&](const auto& s) -> Matrix {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, DisplacementQ>) {
          return displacement_block(rows, cols, single_mode_betas(rows.mode_count(), s.mode, cd(0.0, s.eta / std::sqrt(2.0))));
        } else if constexpr (std::is_same_v<T, Rotation>) {
          Matrix out = Matrix::Zero(rows.dimension(), cols.dimension());
          static const cd powers[4] = {cd(1, 0), cd(0, 1), cd(-1, 0), cd(0, -1)};
          const int kk = ((s.k % 4) + 4) % 4;
          for (std::size_t c = 0; c < cols.dimension(); ++c) {
            auto r = rows.find(cols.multi_index_of(c));
            if (r) out(*r, c) = powers[(kk * cols.multi_index_of(c)[s.mode]) % 4];
          }
          return out;
        } else {
          return displacement_block(rows, cols, s.o.betas(s.scale));
        }
      },
      u);
}

inline DenseOperator materialize_unitary(const UnitarySpec& u, const TruncationShape& shape) {
  return DenseOperator(shape, unitary_block(u, shape, shape));
}

/// Truncation of cos(O) = (U + U^dag)/2 with U = exp(iO).
inline DenseOperator cosine_of(const LinearQuadrature& o, const TruncationShape& shape) {
  if (o.mode_count() != shape.mode_count()) throw ShapeError("cosine argument has wrong mode count");
  Matrix u = displacement_block(shape, shape, o.betas(1.0));
  return DenseOperator(shape, 0.5 * (u + u.adjoint()));
}

}  // namespace certilind
