#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "certilind/errors.hpp"

namespace certilind {

using cd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

inline constexpr double kSymmetryGuard = 1e-10;
inline constexpr double kRadicandFloor = -1e-8;

inline void require_finite(const Matrix& m) {
  if (!m.allFinite()) throw NumericalError("matrix has non-finite entries");
}

inline Matrix herm_part(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

/// Sum of singular values.
inline double trace_norm_general(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  require_finite(m);
  if (m.rows() <= 16 && m.cols() <= 16) {
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues().sum();
  }
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

/// Trace norm of a matrix that is Hermitian up to roundoff.  Falls back to
/// singular values when the symmetry defect exceeds the relative guard.
inline double trace_norm_hermitian(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  require_finite(m);
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  const double defect = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (defect > kSymmetryGuard * scale) return trace_norm_general(m);
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm_part(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

/// Dispatches on a cheap Hermiticity test.
inline double trace_norm(const Matrix& m) {
  if (m.rows() == m.cols() && m.size() > 0) {
    const double scale = m.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() <= kSymmetryGuard * scale) return trace_norm_hermitian(m);
  }
  return trace_norm_general(m);
}

/// tr sqrt(R) for a matrix R that is PSD in exact arithmetic.  Eigenvalues
/// are clipped at zero after symmetrization; anything below the floor,
/// relative to the largest eigenvalue, is reported.
inline double trace_sqrt_psd(const Matrix& r) {
  if (r.size() == 0) return 0.0;
  require_finite(r);
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm_part(r), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double top = std::max(ev.cwiseAbs().maxCoeff(), 1.0);
  double out = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < kRadicandFloor * top) throw NumericalError("radicand is not positive semidefinite");
    if (ev[i] > 0) out += std::sqrt(ev[i]);
  }
  return out;
}

/// Trace norm of a Hermitian D whose block on the index set `zero_rows` x
/// `zero_rows` vanishes.  Rows of that block that are entirely zero inside it
/// are compressed through a QR factorization of the coupling block, so the
/// eigenproblem has size at most twice the complement.
inline double trace_norm_hermitian_sparse_block(const Matrix& d, const std::vector<bool>& in_zero_block) {
  const auto n = d.rows();
  std::vector<Eigen::Index> quiet, active;
  for (Eigen::Index i = 0; i < n; ++i) {
    bool row_quiet = in_zero_block[i];
    if (row_quiet) {
      for (Eigen::Index j = 0; j < n && row_quiet; ++j)
        if (in_zero_block[j] && d(i, j) != cd(0.0)) row_quiet = false;
    }
    (row_quiet ? quiet : active).push_back(i);
  }
  if (active.empty()) return 0.0;
  if (quiet.size() <= active.size()) return trace_norm_hermitian(d);

  const auto q = static_cast<Eigen::Index>(quiet.size());
  const auto a = static_cast<Eigen::Index>(active.size());
  Matrix b(q, a), djj(a, a);
  for (Eigen::Index c = 0; c < a; ++c) {
    for (Eigen::Index r = 0; r < q; ++r) b(r, c) = d(quiet[r], active[c]);
    for (Eigen::Index r = 0; r < a; ++r) djj(r, c) = d(active[r], active[c]);
  }
  require_finite(b);
  Eigen::HouseholderQR<Matrix> qr(b);
  Matrix rr = qr.matrixQR().topRows(a).template triangularView<Eigen::Upper>();
  Matrix small = Matrix::Zero(2 * a, 2 * a);
  small.block(0, a, a, a) = rr;
  small.block(a, 0, a, a) = rr.adjoint();
  small.block(a, a, a, a) = herm_part(djj);
  Eigen::SelfAdjointEigenSolver<Matrix> es(small, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().sum();
}

}  // namespace certilind
