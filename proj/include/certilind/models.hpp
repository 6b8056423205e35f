#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "certilind/fockspace.hpp"
#include "certilind/lindblad.hpp"
#include "certilind/operators.hpp"

namespace certilind {

/// |k><k| on `shape`.
inline DenseOperator fock_state(const TruncationShape& shape, const MultiIndex& k) {
  auto rho = DenseOperator::zero(shape);
  const auto i = shape.index_of(k);
  rho.m(i, i) = 1.0;
  return rho;
}

namespace models {

/// H = u a^dag a, Gamma = a.
inline LindbladModel example_a(CoefficientFn u = CoefficientFn::constant_value(1.0)) {
  LindbladModel m;
  m.modes = 1;
  m.hamiltonian.push_back({std::move(u), PolyOperator::number(1, 0)});
  m.dissipators.push_back(PolyOperator::annihilation(1, 0));
  return m;
}

/// H = u (a + a^dag).
inline LindbladModel example_b(CoefficientFn u = CoefficientFn::constant_value(1.0)) {
  LindbladModel m;
  m.modes = 1;
  m.hamiltonian.push_back({std::move(u), PolyOperator::annihilation(1, 0) + PolyOperator::creation(1, 0)});
  return m;
}

/// Gamma = (cosh r a + sinh r a^dag)^2 - alpha^2 Id; r = 0 is the plain cat.
inline LindbladModel example_d(double alpha, double r) {
  LindbladModel m;
  m.modes = 1;
  m.params = {{"alpha", alpha}, {"r", r}};
  PolyOperator b = PolyOperator::annihilation(1, 0) * cd(std::cosh(r));
  if (r != 0.0) b = b + PolyOperator::creation(1, 0) * cd(std::sinh(r));
  m.dissipators.push_back((b * b - PolyOperator::identity(1) * cd(alpha * alpha)).simplified());
  return m;
}

/// Gamma = a^2 - alpha^2 Id.
inline LindbladModel example_c(double alpha) {
  auto m = example_d(alpha, 0.0);
  m.params = {{"alpha", alpha}};
  return m;
}

/// H = u (a^2 - alpha^2) b^dag + u b (a^dag^2 - alpha^2) with an alpha^2 that may
/// change in time, Gamma = b.
inline LindbladModel example_e(CoefficientFn alpha2, CoefficientFn u = CoefficientFn::constant_value(1.0)) {
  LindbladModel m;
  m.modes = 2;
  auto a = PolyOperator::annihilation(2, 0), ad = PolyOperator::creation(2, 0);
  auto b = PolyOperator::annihilation(2, 1), bd = PolyOperator::creation(2, 1);
  m.hamiltonian.push_back({u, a * a * bd + b * ad * ad});
  CoefficientFn minus;
  if (alpha2.constant) {
    minus = CoefficientFn::constant_value(-alpha2(0.0) * u(0.0));
  } else {
    if (!u.constant) throw ModelError("only one of alpha^2 and u may depend on time");
    cd uu = u(0.0);
    minus = alpha2;
    auto f = alpha2.eval;
    minus.eval = [f, uu](double t) { return -uu * f(t); };
    if (minus.sup_norm_bound) minus.sup_norm_bound = std::abs(uu) * *alpha2.sup_norm_bound;
    if (minus.derivative_sup_bound) minus.derivative_sup_bound = std::abs(uu) * *alpha2.derivative_sup_bound;
    for (auto& p : minus.table_points) p.second = -uu.real() * p.second;
    if (uu.imag() != 0.0) minus.table_points.clear();
  }
  m.hamiltonian.push_back({minus, bd + b});
  m.dissipators.push_back(b);
  return m;
}

inline LindbladModel example_e(double alpha) { return example_e(CoefficientFn::constant_value(alpha * alpha)); }

/// The four rotated GKP dissipators.
inline LindbladModel gkp(double A, double eta, double eps) {
  LindbladModel m;
  m.modes = 1;
  m.params = {{"A", A}, {"eta", eta}, {"eps", eps}};
  for (int k = 0; k < 4; ++k) m.dissipators.push_back(GkpGamma{k, A, eta, eps});
  return m;
}

}  // namespace models
}  // namespace certilind
