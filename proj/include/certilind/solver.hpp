#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "certilind/estimators.hpp"
#include "certilind/fockspace.hpp"
#include "certilind/lindblad.hpp"
#include "certilind/operators.hpp"

namespace certilind {

enum class Scheme { adaptive_rk, rk4, taylor, euler };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::adaptive_rk: return "adaptive_rk";
    case Scheme::rk4: return "rk4";
    case Scheme::taylor: return "taylor";
    case Scheme::euler: return "euler";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "adaptive_rk") return Scheme::adaptive_rk;
  if (s == "rk4") return Scheme::rk4;
  if (s == "taylor") return Scheme::taylor;
  if (s == "euler") return Scheme::euler;
  throw ModelError("unknown scheme '" + s + "'");
}

struct SolverConfig {
  double T = 1.0;
  Scheme scheme = Scheme::adaptive_rk;
  int taylor_order = 1;
  double dt = 1e-3;  // fixed-step schemes
  double time_tol = 1e-10;
  double space_tol = 1e-8;
  double downsize_factor = 5.0;
  ShapeStep grow_step = std::vector<int>{4};
  ShapeStep shrink_step = std::vector<int>{4};
  std::size_t max_dimension = 20000;
  bool enable_time_certificate = false;
  bool closed_space = false;  // the working shape is the whole space

  void validate() const {
    if (!(T > 0.0)) throw ModelError("T must be positive");
    if (!(space_tol > 0.0)) throw ModelError("space_tol must be positive");
    if (!(time_tol > 0.0)) throw ModelError("time_tol must be positive");
    if (!(downsize_factor > 1.0)) throw ModelError("downsize_factor must exceed 1");
    if (scheme != Scheme::adaptive_rk && !(dt > 0.0)) throw ModelError("dt must be positive");
    if (scheme == Scheme::taylor && taylor_order < 1) throw ModelError("Taylor order must be at least 1");
  }
};

enum class ResizeEvent { none, grow, shrink };

inline const char* to_string(ResizeEvent r) {
  switch (r) {
    case ResizeEvent::none: return "none";
    case ResizeEvent::grow: return "grow";
    case ResizeEvent::shrink: return "shrink";
  }
  return "?";
}

struct TrajectoryRecord {
  double t;
  TruncationShape shape;
  std::size_t dim;
  double trace;
  double xi;
  double defect_rate;
  bool accepted;
  ResizeEvent resize;
};

struct RunResult {
  DenseOperator state;
  EstimatorLedger ledger;
  std::vector<TrajectoryRecord> trajectory;
  std::vector<std::string> warnings;
  std::size_t accepted_steps = 0;
};

using Rhs = std::function<Matrix(double, const Matrix&)>;

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4) with PI step-size control.

class Dopri5 {
 public:
  Dopri5(double tol, double T) : tol_(tol), T_(T) {}

  struct Step {
    Matrix y;
    double h;
  };

  /// Advances by one accepted step no longer than hmax.
  Step step(const Rhs& f, double t, const Matrix& y, double hmax) {
    saved_ = {h_, errold_, last_rejected_};
    if (!fsal_) fsal_ = f(t, y);
    const Matrix& k1 = *fsal_;
    if (h_ <= 0.0) h_ = initial_step(f, t, y, k1, hmax);
    double h = std::min(h_, hmax);
    bool rejected = false;
    for (;;) {
      if (h < 1e-14 * T_) throw NumericalError("step size underflow at t = " + std::to_string(t));
      Matrix k2 = f(t + c2 * h, y + h * (a21 * k1));
      Matrix k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
      Matrix k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
      Matrix k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      Matrix k6 = f(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      Matrix ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
      Matrix k7 = f(t + h, ynew);
      Matrix e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double err = error_norm(e, y, ynew);
      if (!std::isfinite(err)) throw NumericalError("non-finite error estimate");
      const double fac11 = std::pow(err, expo1);
      if (err <= 1.0) {
        double fac = fac11 / std::pow(errold_, beta);
        fac = std::max(1.0 / fac2, std::min(1.0 / fac1, fac / safe));
        double hnew = h / fac;
        if (rejected) hnew = std::min(hnew, h);
        errold_ = std::max(err, 1e-4);
        last_rejected_ = rejected;
        h_ = hnew;
        fsal_ = std::move(k7);
        return {std::move(ynew), h};
      }
      h = h / std::min(1.0 / fac1, fac11 / safe);
      rejected = true;
    }
  }

  /// Forget the cached derivative (the state or its shape changed).
  void invalidate() { fsal_.reset(); }

  /// Undo the controller update of the last step and drop the cache.
  void rewind() {
    h_ = saved_.h;
    errold_ = saved_.errold;
    last_rejected_ = saved_.last_rejected;
    fsal_.reset();
  }

  double proposed_step() const { return h_; }

 private:
  // max norm: unchanged by empty Fock levels, so nested truncations take the same steps
  double error_norm(const Matrix& e, const Matrix& y, const Matrix& ynew) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      double sc = tol_ + tol_ * std::max(std::abs(y.data()[i]), std::abs(ynew.data()[i]));
      s = std::max(s, std::abs(e.data()[i]) / sc);
    }
    return s;
  }

  double max_scaled(const Matrix& v, const Matrix& y) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s = std::max(s, std::abs(v.data()[i]) / (tol_ + tol_ * std::abs(y.data()[i])));
    return s;
  }

  double initial_step(const Rhs& f, double t, const Matrix& y, const Matrix& f0, double hmax) const {
    const double dnf = max_scaled(f0, y), dny = max_scaled(y, y);
    double h = (dnf <= 1e-5 || dny <= 1e-5) ? 1e-6 : 0.01 * dny / dnf;
    h = std::min(h, hmax);
    Matrix f1 = f(t + h, y + h * f0);
    const double der2 = max_scaled(f1 - f0, y) / h;
    const double der12 = std::max(der2, dnf);
    const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
    return std::min({100.0 * h, h1, hmax});
  }

  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                          a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double beta = 0.04, expo1 = 0.2 - beta * 0.75, fac1 = 0.2, fac2 = 10.0, safe = 0.9;

  struct Saved {
    double h = 0.0, errold = 1e-4;
    bool last_rejected = false;
  };

  double tol_, T_;
  double h_ = 0.0, errold_ = 1e-4;
  bool last_rejected_ = false;
  std::optional<Matrix> fsal_;
  Saved saved_;
};

/// One accepted Dormand-Prince step on L_shape; returns the increment and step size.
inline std::pair<DenseOperator, double> adaptive_solve_one_step(const LindbladModel& model, const TruncationShape& shape,
                                                                const DenseOperator& rho, double t, double time_tol,
                                                                double hmax) {
  if (!(rho.shape == shape)) throw ShapeError("state is not on the requested shape");
  TruncatedGenerator gen(model, shape);
  Dopri5 dp(time_tol, hmax);
  auto s = dp.step([&](double tt, const Matrix& x) { return gen.apply(tt, x); }, t, rho.m, hmax);
  return {DenseOperator(shape, s.y - rho.m), s.h};
}

// ---------------------------------------------------------------------------
// Fixed-step schemes.

inline Matrix rk4_step(const Rhs& f, double t, const Matrix& y, double h) {
  Matrix k1 = f(t, y);
  Matrix k2 = f(t + 0.5 * h, y + (0.5 * h) * k1);
  Matrix k3 = f(t + 0.5 * h, y + (0.5 * h) * k2);
  Matrix k4 = f(t + h, y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// sum_{j<=k} dt^j/j! L_N^j rho
inline Matrix taylor_stepper(const TruncatedGenerator& gen, const Matrix& rho, double dt, int k) {
  if (k < 1) throw ModelError("Taylor order must be at least 1");
  Matrix out = rho, term = rho;
  for (int j = 1; j <= k; ++j) {
    term = (dt / j) * gen.apply(0.0, term);
    out += term;
  }
  return out;
}

inline Matrix euler_stepper(const TruncatedGenerator& gen, double t, const Matrix& rho, double dt) {
  return rho + dt * gen.apply(t, rho);
}

// ---------------------------------------------------------------------------
// Drivers.

namespace detail {

struct ShapeWorkspace {
  std::shared_ptr<TruncatedGenerator> gen;
  std::shared_ptr<DefectEvaluator> defect;
};

class WorkspaceCache {
 public:
  explicit WorkspaceCache(const LindbladModel& model, bool closed) : model_(model), closed_(closed) {}
  const ShapeWorkspace& get(const TruncationShape& shape) {
    auto key = shape.describe();
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    ShapeWorkspace w;
    w.gen = std::make_shared<TruncatedGenerator>(model_, shape);
    if (!closed_) w.defect = std::make_shared<DefectEvaluator>(model_, shape);
    return cache_.emplace(key, std::move(w)).first->second;
  }
  double defect(const TruncationShape& shape, double t, const Matrix& rho) {
    const auto& w = get(shape);
    return w.defect ? (*w.defect)(t, rho) : 0.0;
  }

 private:
  const LindbladModel& model_;
  bool closed_;
  std::map<std::string, ShapeWorkspace> cache_;
};

inline DenseOperator initial_on(const DenseOperator& rho0, const TruncationShape& shape, EstimatorLedger& ledger) {
  if (rho0.shape == shape) return rho0;
  if (contains(rho0.shape, shape)) return embed(rho0, shape);
  if (contains(shape, rho0.shape)) {
    auto [small, lost] = project(rho0, shape);
    ledger.add(0.0, LedgerKind::init_projection, lost);
    return small;
  }
  throw ShapeError("initial state shape " + rho0.shape.describe() + " is not comparable with " + shape.describe());
}

inline TrajectoryRecord record(double t, const DenseOperator& rho, double xi, double rate, bool accepted, ResizeEvent r) {
  return {t, rho.shape, rho.dimension(), rho.m.trace().real(), xi, rate, accepted, r};
}

}  // namespace detail

/// Integrates to T on a fixed shape.
inline RunResult run_fixed(const LindbladModel& model, const DenseOperator& rho0, const TruncationShape& shape,
                           const SolverConfig& cfg) {
  cfg.validate();
  model.validate();
  EstimatorLedger ledger;
  DenseOperator rho = detail::initial_on(rho0, shape, ledger);
  const double trace0 = rho.m.trace().real();
  detail::WorkspaceCache cache(model, cfg.closed_space);
  const auto& ws = cache.get(shape);
  const TruncatedGenerator& gen = *ws.gen;
  Rhs f = [&](double t, const Matrix& x) { return gen.apply(t, x); };

  std::vector<TrajectoryRecord> traj;
  traj.push_back(detail::record(0.0, rho, ledger.xi, cache.defect(shape, 0.0, rho.m), true, ResizeEvent::none));

  const bool certify = cfg.enable_time_certificate && (cfg.scheme == Scheme::taylor || cfg.scheme == Scheme::euler);
  std::size_t steps = 0;
  double t = 0.0;
  if (cfg.scheme == Scheme::adaptive_rk) {
    Dopri5 dp(cfg.time_tol, cfg.T);
    while (cfg.T - t > 1e-14 * cfg.T) {
      auto s = dp.step(f, t, rho.m, cfg.T - t);
      double tn = (cfg.T - (t + s.h) <= 1e-14 * cfg.T) ? cfg.T : t + s.h;
      rho.m = std::move(s.y);
      double rate = cache.defect(shape, tn, rho.m);
      if (rate > 0.0) xi_step(ledger, tn, rate, tn - t);
      t = tn;
      ++steps;
      traj.push_back(detail::record(t, rho, ledger.xi, rate, true, ResizeEvent::none));
    }
  } else {
    const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(cfg.T / cfg.dt - 1e-9)));
    const double h = cfg.T / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double tn = static_cast<double>(i) * h;
      if (certify) {
        if (cfg.scheme == Scheme::taylor) {
          double b = taylor_step_bound(model, rho, h, cfg.taylor_order, cfg.closed_space);
          ledger.add(tn, LedgerKind::time_taylor, b);
        } else {
          double b = euler_timedep_step_bound(model, rho, tn, h);
          ledger.add(tn, LedgerKind::time_euler, b);
        }
      }
      switch (cfg.scheme) {
        case Scheme::rk4: rho.m = rk4_step(f, tn, rho.m, h); break;
        case Scheme::taylor: rho.m = taylor_stepper(gen, rho.m, h, cfg.taylor_order); break;
        case Scheme::euler: rho.m = euler_stepper(gen, tn, rho.m, h); break;
        default: break;
      }
      t = (i + 1 == n) ? cfg.T : static_cast<double>(i + 1) * h;
      double rate = cache.defect(shape, t, rho.m);
      if (rate > 0.0) xi_step(ledger, t, rate, h);
      ++steps;
      traj.push_back(detail::record(t, rho, ledger.xi, rate, true, ResizeEvent::none));
    }
  }
  RunResult out{rho, ledger, std::move(traj), {}, steps};
  out.warnings = check_density(out.state.m, trace0);
  return out;
}

/// Space-adaptive driver: grows on a rejected budget, shrinks when the
/// discarded tail fits under the downsized budget.
inline RunResult run_adaptive(const LindbladModel& model, const DenseOperator& rho0, const TruncationShape& shape,
                              const SolverConfig& cfg) {
  cfg.validate();
  model.validate();
  if (cfg.scheme != Scheme::adaptive_rk) throw ModelError("the space-adaptive driver uses the adaptive_rk scheme");
  if (shape.dimension() > cfg.max_dimension) throw CertificationError("initial shape exceeds max_dimension");
  EstimatorLedger ledger;
  DenseOperator rho = detail::initial_on(rho0, shape, ledger);
  const double trace0 = rho.m.trace().real();
  detail::WorkspaceCache cache(model, false);
  std::vector<TrajectoryRecord> traj;
  traj.push_back(detail::record(0.0, rho, ledger.xi, cache.defect(rho.shape, 0.0, rho.m), true, ResizeEvent::none));

  Dopri5 dp(cfg.time_tol, cfg.T);
  const double T = cfg.T;
  double t = 0.0;
  std::size_t steps = 0;
  bool shrunk = false;
  while (T - t > 1e-14 * T) {
    const auto& ws = cache.get(rho.shape);
    const TruncatedGenerator& gen = *ws.gen;
    auto s = dp.step([&](double tt, const Matrix& x) { return gen.apply(tt, x); }, t, rho.m, T - t);
    const double tn = (T - (t + s.h) <= 1e-14 * T) ? T : t + s.h;
    const double rate = (*ws.defect)(tn, s.y);
    const double dxi = (tn - t) * rate;
    if (!(ledger.xi + dxi < tn / T * cfg.space_tol)) {
      traj.push_back({tn, rho.shape, rho.dimension(), s.y.trace().real(), ledger.xi + dxi, rate, false, ResizeEvent::grow});
      auto bigger = grow(rho.shape, cfg.grow_step);
      if (bigger.dimension() > cfg.max_dimension)
        throw CertificationError("space tolerance cannot be met within max_dimension = " +
                                 std::to_string(cfg.max_dimension) + " at t = " + std::to_string(t));
      rho = embed(rho, bigger);
      dp.rewind();
      continue;
    }
    if (dxi > 0.0) xi_step(ledger, tn, rate, tn - t);
    rho.m = std::move(s.y);
    t = tn;
    ++steps;
    ResizeEvent ev = ResizeEvent::none;
    if (can_shrink(rho.shape, cfg.shrink_step)) {
      auto smaller = shrink(rho.shape, cfg.shrink_step);
      if (smaller.dimension() > 0) {
        auto [small, tail] = project(rho, smaller);
        if (ledger.xi + tail < t / T * cfg.space_tol / cfg.downsize_factor) {
          ledger.add(t, LedgerKind::shrink_jump, tail);
          rho = std::move(small);
          dp.invalidate();
          ev = ResizeEvent::shrink;
          shrunk = true;
        }
      }
    }
    traj.push_back(detail::record(t, rho, ledger.xi, rate, true, ev));
  }
  RunResult out{rho, ledger, std::move(traj), {}, steps};
  out.warnings = check_density(out.state.m, shrunk ? out.state.m.trace().real() : trace0);
  return out;
}

inline RunResult run_adaptive(const LindbladModel& model, const DenseOperator& rho0, const SolverConfig& cfg) {
  return run_adaptive(model, rho0, rho0.shape, cfg);
}

/// Dispatches on whether the configuration asks for space adaptivity.
inline RunResult run(const LindbladModel& model, const DenseOperator& rho0, const TruncationShape& shape,
                     const SolverConfig& cfg, bool adaptive) {
  return adaptive ? run_adaptive(model, rho0, shape, cfg) : run_fixed(model, rho0, shape, cfg);
}

}  // namespace certilind
