#include <gtest/gtest.h>

#include <random>

#include "certilind/estimators.hpp"
#include "certilind/models.hpp"
#include "model_oracles.hpp"

using namespace certilind;

namespace {

DenseOperator random_state(const TruncationShape& s, std::mt19937_64& rng) {
  return DenseOperator(s, oracle::random_density(s.dimension(), rng));
}

// Largest occupation seen in a Fock-like random state: a density weighted
// towards the top of the truncation, where defects are largest.
DenseOperator top_heavy_state(const TruncationShape& s, std::mt19937_64& rng) {
  Matrix g = oracle::random_matrix(s.dimension(), s.dimension(), rng);
  for (std::size_t i = 0; i < s.dimension(); ++i) g.row(i) *= 1.0 + static_cast<double>(i);
  Matrix r = g * g.adjoint();
  return DenseOperator(s, r / r.trace());
}

TruncationShape big_box(const TruncationShape& s, int extra) {
  if (s.is_rect()) return grow(s, std::vector<int>(s.mode_count(), extra));
  return grow(s, Rational(extra));
}

}  // namespace

TEST(TraceNorms, AgreeWithSingularValues) {
  std::mt19937_64 rng(1);
  Matrix h = oracle::random_hermitian(9, rng);
  Matrix g = oracle::random_matrix(7, 7, rng);
  EXPECT_NEAR(trace_norm_hermitian(h), oracle::trace_norm(h), 1e-11);
  EXPECT_NEAR(trace_norm_general(g), oracle::trace_norm(g), 1e-11);
  Matrix p = g * g.adjoint();
  Eigen::SelfAdjointEigenSolver<Matrix> es(p);
  Matrix root = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
  EXPECT_NEAR(trace_sqrt_psd(p), root.trace().real(), 1e-10);
}

TEST(TraceNorms, SparseBlockVariantMatchesDense) {
  std::mt19937_64 rng(2);
  const int n = 12;
  Matrix d = oracle::random_hermitian(n, rng);
  std::vector<bool> zero(n, false);
  for (int i = 0; i < 8; ++i) zero[i] = true;
  d.topLeftCorner(8, 8).setZero();
  EXPECT_NEAR(trace_norm_hermitian_sparse_block(d, zero), oracle::trace_norm(d), 1e-10);
}

TEST(SpaceDefect, ExampleAVanishes) {
  std::mt19937_64 rng(3);
  for (int n : {2, 5, 9}) {
    auto s = TruncationShape::rect({n});
    EXPECT_EQ(space_defect(models::example_a(), 0.0, random_state(s, rng)), 0.0);
  }
}

TEST(SpaceDefect, GenericMatchesOracleOnExamples) {
  std::mt19937_64 rng(4);
  std::vector<std::pair<LindbladModel, TruncationShape>> cases = {
      {models::example_b(CoefficientFn::constant_value(0.7)), TruncationShape::rect({5})},
      {models::example_c(1.2), TruncationShape::rect({6})},
      {models::example_d(1.0, 0.6), TruncationShape::rect({6})},
      {models::example_e(1.1), TruncationShape::rect({4, 3})},
      {models::example_e(1.1), TruncationShape::weighted({Rational(1, 2), Rational(1)}, Rational(3))}};
  for (const auto& [m, s] : cases) {
    for (int trial = 0; trial < 3; ++trial) {
      auto rho = top_heavy_state(s, rng);
      double ref = oracle::space_defect(m, 0.0, s, big_box(s, 6), rho.m);
      EXPECT_NEAR(space_defect(m, 0.0, rho), ref, 1e-10 * std::max(1.0, ref)) << s.describe();
    }
  }
}

TEST(SpaceDefect, NonHermitianCoefficientPath) {
  std::mt19937_64 rng(5);
  auto m = models::example_b(CoefficientFn::constant_value(cd(0.3, 0.4)));
  auto s = TruncationShape::rect({4});
  auto rho = top_heavy_state(s, rng);
  EXPECT_NEAR(space_defect(m, 0.0, rho), oracle::space_defect(m, 0.0, s, big_box(s, 4), rho.m), 1e-11);
}

TEST(ClosedForms, DriveMatchesGenericAndFockValue) {
  std::mt19937_64 rng(6);
  for (int n : {3, 8, 15}) {
    auto s = TruncationShape::rect({n});
    auto top = fock_state(s, {n});
    EXPECT_NEAR(defect_drive_closed_form(1.0, top), 2.0 * std::sqrt(n + 1.0), 1e-12);
    EXPECT_NEAR(space_defect(models::example_b(), 0.0, top), 2.0 * std::sqrt(n + 1.0), 1e-11);
    auto rho = top_heavy_state(s, rng);
    auto m = models::example_b(CoefficientFn::constant_value(0.45));
    EXPECT_NEAR(defect_drive_closed_form(0.45, rho), space_defect(m, 0.0, rho), 1e-11);
  }
}

TEST(ClosedForms, CatMatchesGenericAndOracle) {
  std::mt19937_64 rng(7);
  for (double alpha : {0.5, 1.0, 2.0}) {
    for (int n : {1, 4, 10}) {
      auto s = TruncationShape::rect({n});
      auto rho = top_heavy_state(s, rng);
      double closed = defect_cat_closed_form(alpha, rho);
      double generic = space_defect(models::example_c(alpha), 0.0, rho);
      double ref = oracle::space_defect(models::example_c(alpha), 0.0, s, big_box(s, 5), rho.m);
      EXPECT_NEAR(closed, ref, 1e-10 * std::max(1.0, ref)) << alpha << " " << n;
      EXPECT_NEAR(generic, ref, 1e-10 * std::max(1.0, ref)) << alpha << " " << n;
    }
  }
}

TEST(ClosedForms, DissipatorBlocksMatchGeneric) {
  std::mt19937_64 rng(8);
  for (double r : {0.0, 0.7}) {
    auto m = models::example_d(1.1, r);
    auto s = TruncationShape::rect({7});
    auto rho = top_heavy_state(s, rng);
    EXPECT_NEAR(dissipator_defect_blocks(std::get<PolyOperator>(m.dissipators[0]), rho), space_defect(m, 0.0, rho), 1e-10);
  }
}

TEST(Unitary, OffBlockNormMatchesDenseComputation) {
  std::mt19937_64 rng(9);
  const int cap = 160, n2 = 14, n1 = 10;
  const double eta = 1.3;
  Matrix u = oracle::exp_i_eta_q(cap, eta);
  Matrix m = oracle::random_matrix(n2 + 1, n2 + 1, rng);
  Matrix um = u.leftCols(n2 + 1) * m;
  double ref = oracle::trace_norm(um.bottomRows(cap - n1));
  Matrix u12 = u.topLeftCorner(n1 + 1, n2 + 1);
  // the Gram form loses half the digits on nearly-contained columns
  const double tol = std::sqrt(std::numeric_limits<double>::epsilon() * m.size()) * m.norm();
  EXPECT_NEAR(unitary_offblock_norm_block(u12, m), ref, tol);
  auto s2 = TruncationShape::rect({n2});
  DenseOperator ud(s2, u.topLeftCorner(n2 + 1, n2 + 1));
  // leakage between shape 1 and shape 2 is not seen by the block on shape 2
  EXPECT_GT(unitary_offblock_norm(ud, DenseOperator(s2, m), TruncationShape::rect({n1})), 0.0);
}

TEST(Gkp, BoundDominatesTrueDefect) {
  std::mt19937_64 rng(10);
  const double A = 0.95, eta = 2.0 * std::sqrt(M_PI), eps = 0.1;
  const int cap = 220;
  Matrix id = Matrix::Identity(cap + 1, cap + 1);
  Matrix a = oracle::annihilation(cap);
  Matrix p = (a - a.adjoint()) / cd(0, std::sqrt(2.0));
  Matrix g0 = A * oracle::exp_i_eta_q(cap, eta) * (id - eps * p) - id;
  std::vector<Matrix> gs;
  for (int k = 0; k < 4; ++k) {
    Eigen::VectorXcd r(cap + 1);
    for (int j = 0; j <= cap; ++j) r(j) = std::pow(cd(0, 1), (k * j) % 4);
    gs.push_back(r.asDiagonal() * g0 * r.conjugate().asDiagonal());
  }
  for (int n : {8, 15, 25}) {
    auto s = TruncationShape::rect({n});
    for (int trial = 0; trial < 2; ++trial) {
      auto rho = top_heavy_state(s, rng);
      Matrix big = Matrix::Zero(cap + 1, cap + 1);
      big.topLeftCorner(n + 1, n + 1) = rho.m;
      // only the columns reached from the truncation matter, so the large
      // cap is exact to roundoff for these n
      Matrix exact = oracle::lindblad(Matrix::Zero(cap + 1, cap + 1), gs, big);
      std::vector<Matrix> small;
      for (const auto& g : gs) small.push_back(g.topLeftCorner(n + 1, n + 1));
      Matrix trunc = Matrix::Zero(cap + 1, cap + 1);
      trunc.topLeftCorner(n + 1, n + 1) = oracle::lindblad(Matrix::Zero(n + 1, n + 1), small, rho.m);
      double truth = oracle::trace_norm((exact - trunc).topLeftCorner(80, 80));
      double bound = gkp_defect_bound(A, eta, eps, rho);
      EXPECT_GE(bound, truth * (1.0 - 1e-9)) << n;
      EXPECT_EQ(space_defect(models::gkp(A, eta, eps), 0.0, rho), bound);
    }
  }
}

TEST(Cosine, EstimatorEqualsDenseDefect) {
  std::mt19937_64 rng(11);
  const int cap = 200;
  for (double x : {1.0, 2.5}) {
    Matrix u = oracle::exp_i_eta_q(cap, x);
    Matrix c = 0.5 * (u + u.adjoint());
    for (int n : {6, 14}) {
      auto s = TruncationShape::rect({n});
      auto rho = top_heavy_state(s, rng);
      Matrix big = Matrix::Zero(cap + 1, cap + 1);
      big.topLeftCorner(n + 1, n + 1) = rho.m;
      Matrix cn = Matrix::Zero(cap + 1, cap + 1);
      cn.topLeftCorner(n + 1, n + 1) = c.topLeftCorner(n + 1, n + 1);
      double truth = oracle::trace_norm(((c - cn) * big).topRows(90));
      EXPECT_NEAR(cosine_defect(LinearQuadrature{{x}, {0.0}}, rho), truth, 1e-8) << x << " " << n;
    }
  }
}

TEST(Cosine, HamiltonianDefectIsTwiceCoefficientTimesEstimator) {
  std::mt19937_64 rng(12);
  LindbladModel m;
  m.hamiltonian.push_back({CoefficientFn::constant_value(-0.3), CosineArg{LinearQuadrature{{1.5}, {0.0}}}});
  auto s = TruncationShape::rect({9});
  auto rho = top_heavy_state(s, rng);
  EXPECT_NEAR(space_defect(m, 0.0, rho), 0.6 * cosine_defect(LinearQuadrature{{1.5}, {0.0}}, rho), 1e-14);
}

TEST(Ledger, AccumulatesAndRejectsBadValues) {
  EstimatorLedger l;
  xi_step(l, 0.1, 2.0, 0.1);
  l.add(0.1, LedgerKind::shrink_jump, 1e-3);
  EXPECT_NEAR(l.xi, 0.201, 1e-15);
  EXPECT_NEAR(l.total(LedgerKind::space_defect), 0.2, 1e-15);
  EXPECT_EQ(l.breakdown.size(), 2u);
  EXPECT_THROW(l.add(0.2, LedgerKind::space_defect, -1.0), NumericalError);
  EXPECT_THROW(l.add(0.2, LedgerKind::space_defect, std::nan("")), NumericalError);
  EXPECT_THROW(xi_step(l, 0.2, 1.0, 0.0), NumericalError);
  EXPECT_EQ(global_time_bound({1e-3, 2e-3}), 3e-3);
  EXPECT_STREQ(to_string(LedgerKind::init_projection), "init_projection");
}

TEST(TimeBounds, TaylorClosedRemainderScales) {
  std::mt19937_64 rng(13);
  auto m = models::example_c(1.0);
  auto rho = random_state(TruncationShape::rect({6}), rng);
  for (int k : {1, 2, 3}) {
    double b1 = taylor_step_bound(m, rho, 1e-2, k, true);
    double b2 = taylor_step_bound(m, rho, 5e-3, k, true);
    EXPECT_NEAR(b1 / b2, std::pow(2.0, k + 1), 1e-9);
  }
}

TEST(TimeBounds, TaylorBoundDominatesOneStepError) {
  std::mt19937_64 rng(14);
  auto m = models::example_b(CoefficientFn::constant_value(0.8));
  auto small = TruncationShape::rect({3});
  auto big = TruncationShape::rect({28});
  auto rho = random_state(small, rng);
  Matrix super = oracle::superoperator(oracle::hamiltonian(m, 0.0, big), oracle::gammas(m, big));
  Matrix l_small = oracle::superoperator(oracle::hamiltonian(m, 0.0, small), oracle::gammas(m, small));
  for (int k : {1, 2, 4}) {
    for (double dt : {0.05, 0.2}) {
      Matrix exact = oracle::evolve(super, oracle::embed(rho.m, small, big), dt);
      Eigen::VectorXcd x = oracle::vec(rho.m), acc = x;
      double c = 1.0;
      for (int j = 1; j <= k; ++j) {
        x = l_small * x;
        c *= dt / j;
        acc += c * x;
      }
      Matrix stepped = oracle::embed(oracle::unvec(acc, 4), small, big);
      double err = oracle::trace_norm(exact - stepped);
      double bound = taylor_step_bound(m, rho, dt, k);
      EXPECT_GE(bound, err) << k << " " << dt;
      EXPECT_LT(bound, 50.0 * err + 1e-300) << k << " " << dt;
    }
  }
}

TEST(TimeBounds, EulerBoundDominatesOneStepError) {
  std::mt19937_64 rng(15);
  auto u = CoefficientFn::expression("sin(t)", {}, 1.0, 1.0);
  auto m = models::example_b(u);
  auto small = TruncationShape::rect({3});
  auto big = TruncationShape::rect({30});
  auto rho = random_state(small, rng);
  const double t0 = 0.7, dt = 0.05;
  auto f = [&](double t, const Matrix& x) { return oracle::generator(m, t, big, x); };
  Matrix y = oracle::embed(rho.m, small, big);
  const int sub = 400;
  const double h = dt / sub;
  for (int i = 0; i < sub; ++i) {
    double t = t0 + i * h;
    Matrix k1 = f(t, y), k2 = f(t + h / 2, y + h / 2 * k1), k3 = f(t + h / 2, y + h / 2 * k2), k4 = f(t + h, y + h * k3);
    y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  Matrix euler = rho.m + dt * oracle::generator(m, t0, small, rho.m);
  double err = oracle::trace_norm(y - oracle::embed(euler, small, big));
  double bound = euler_timedep_step_bound(m, rho, t0, dt);
  EXPECT_GE(bound, err);
  EXPECT_LT(bound, 20.0 * err);
}

TEST(TimeBounds, EulerNeedsDerivativeBound) {
  auto m = models::example_b(CoefficientFn::expression("sin(t)", {}, 1.0, std::nullopt));
  auto rho = fock_state(TruncationShape::rect({3}), {0});
  EXPECT_THROW(euler_timedep_step_bound(m, rho, 0.0, 0.1), ModelError);
}

TEST(Cosine, TwoModeGramFormMatchesDenseDefect) {
  std::mt19937_64 rng(16);
  const int cap = 90;
  Matrix a = oracle::annihilation(cap);
  Matrix q = (a + a.adjoint()) / std::sqrt(2.0);
  Matrix p = (a - a.adjoint()) / cd(0, std::sqrt(2.0));
  Matrix c0 = oracle::expm(cd(0, 0.9) * q), c1 = oracle::expm(cd(0, -0.6) * p);
  const int k0 = 30, k1 = 30;
  Matrix u = oracle::kron(c0.topLeftCorner(k0 + 1, k0 + 1), c1.topLeftCorner(k1 + 1, k1 + 1));
  Matrix cosine = 0.5 * (u + u.adjoint());
  auto s = TruncationShape::rect({4, 3});
  auto box = TruncationShape::rect({k0, k1});
  auto rho = top_heavy_state(s, rng);
  auto where = oracle::positions(s, box);
  Matrix cn = Matrix::Zero(box.dimension(), box.dimension());
  for (std::size_t r = 0; r < where.size(); ++r)
    for (std::size_t c = 0; c < where.size(); ++c)
      cn(oracle::kron_index({k0, k1}, s.multi_index_of(r)), oracle::kron_index({k0, k1}, s.multi_index_of(c))) =
          cosine(oracle::kron_index({k0, k1}, s.multi_index_of(r)), oracle::kron_index({k0, k1}, s.multi_index_of(c)));
  Matrix emb = Matrix::Zero(box.dimension(), box.dimension());
  for (std::size_t r = 0; r < where.size(); ++r)
    for (std::size_t c = 0; c < where.size(); ++c)
      emb(oracle::kron_index({k0, k1}, s.multi_index_of(r)), oracle::kron_index({k0, k1}, s.multi_index_of(c))) = rho.m(r, c);
  double truth = oracle::trace_norm((cosine - cn) * emb);
  EXPECT_NEAR(cosine_defect(LinearQuadrature{{0.9, 0.0}, {0.0, -0.6}}, rho), truth, 1e-7);
}

TEST(Cosine, ColumnTailBoundDominatesExactElements) {
  const cd beta(1.7, 0.4);
  const int n = 6;
  Matrix d = displacement_elements(beta, 400, n);
  for (int kmin : {12, 20, 30}) {
    double tail = 0.0;
    for (int m = n + kmin; m <= 400; ++m) tail += std::norm(d(m, n));
    EXPECT_GE(displacement_column_tail(std::abs(beta), n, kmin), std::sqrt(tail)) << kmin;
  }
  EXPECT_EQ(displacement_column_tail(0.0, 3, 1), 0.0);
  EXPECT_TRUE(std::isinf(displacement_column_tail(5.0, 3, 1)));
}
