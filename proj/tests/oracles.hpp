#pragma once

// Reference constructions built without the library's Fock machinery:
// Kronecker-product ladder operators, vectorized superoperators, dense
// exponentials and large-truncation brute force.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "certilind/fockspace.hpp"

namespace oracle {

using cd = std::complex<double>;
using Matrix = Eigen::MatrixXcd;

inline Matrix annihilation(int cap) {
  Matrix a = Matrix::Zero(cap + 1, cap + 1);
  for (int n = 1; n <= cap; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Single-mode matrix `op` placed on `mode` of a box with per-mode caps;
/// mode 0 is the most significant Kronecker factor.
inline Matrix on_mode(const std::vector<int>& caps, int mode, const Matrix& op) {
  Matrix out = Matrix::Identity(1, 1);
  for (int m = 0; m < static_cast<int>(caps.size()); ++m)
    out = kron(out, m == mode ? op : Matrix(Matrix::Identity(caps[m] + 1, caps[m] + 1)));
  return out;
}

inline Matrix ladder(const std::vector<int>& caps, int mode) { return on_mode(caps, mode, annihilation(caps[mode])); }

/// Kronecker index of a multi-index in a box.
inline Eigen::Index kron_index(const std::vector<int>& caps, const std::vector<int>& k) {
  Eigen::Index idx = 0;
  for (std::size_t m = 0; m < caps.size(); ++m) idx = idx * (caps[m] + 1) + k[m];
  return idx;
}

/// Restricts a box-ordered operator to the states of `shape` (which must fit
/// in the box), in the shape's own basis order.
inline Matrix to_shape(const Matrix& boxed, const std::vector<int>& caps, const certilind::TruncationShape& shape) {
  const auto n = static_cast<Eigen::Index>(shape.dimension());
  Matrix out(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      out(r, c) = boxed(kron_index(caps, shape.multi_index_of(r)), kron_index(caps, shape.multi_index_of(c)));
  return out;
}

/// L(rho) = -i[H, rho] + sum_k G rho G^dag - 1/2 {G^dag G, rho}
inline Matrix lindblad(const Matrix& h, const std::vector<Matrix>& gs, const Matrix& rho) {
  Matrix out = cd(0, -1) * (h * rho - rho * h);
  for (const auto& g : gs) {
    Matrix k = g.adjoint() * g;
    out += g * rho * g.adjoint() - 0.5 * (k * rho + rho * k);
  }
  return out;
}

/// Column-stacking superoperator: vec(A X B) = (B^T kron A) vec(X).
inline Matrix superoperator(const Matrix& h, const std::vector<Matrix>& gs) {
  const auto n = h.rows();
  Matrix id = Matrix::Identity(n, n);
  Matrix s = cd(0, -1) * (kron(id, h) - kron(h.transpose(), id));
  for (const auto& g : gs) {
    Matrix k = g.adjoint() * g;
    s += kron(g.conjugate(), g) - 0.5 * (kron(id, k) + kron(k.transpose(), id));
  }
  return s;
}

inline Eigen::VectorXcd vec(const Matrix& m) { return Eigen::Map<const Eigen::VectorXcd>(m.data(), m.size()); }
inline Matrix unvec(const Eigen::VectorXcd& v, Eigen::Index n) { return Eigen::Map<const Matrix>(v.data(), n, n); }

inline Matrix expm(const Matrix& m) { return m.exp(); }

/// exp(t S) vec(rho0), unvectorized.
inline Matrix evolve(const Matrix& super, const Matrix& rho0, double t) {
  Matrix e = expm(t * super);
  return unvec(e * vec(rho0), rho0.rows());
}

inline double trace_norm(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().sum();
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = cd(g(rng), g(rng));
  return m;
}

inline Matrix random_hermitian(Eigen::Index n, std::mt19937_64& rng) {
  Matrix m = random_matrix(n, n, rng);
  return 0.5 * (m + m.adjoint());
}

/// Random density matrix of trace one.
inline Matrix random_density(Eigen::Index n, std::mt19937_64& rng) {
  Matrix g = random_matrix(n, n, rng);
  Matrix r = g * g.adjoint();
  return r / r.trace();
}

/// exp(i eta q) on a large truncation via the dense exponential; reliable
/// only well inside the truncation.
inline Matrix exp_i_eta_q(int cap, double eta) {
  Matrix a = annihilation(cap);
  Matrix q = (a + a.adjoint()) / std::sqrt(2.0);
  return expm(cd(0, eta) * q);
}

}  // namespace oracle
