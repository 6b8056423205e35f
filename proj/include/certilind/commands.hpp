#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <future>
#include <iostream>
#include <numbers>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "certilind/errors.hpp"
#include "certilind/model_file.hpp"
#include "certilind/models.hpp"
#include "certilind/output.hpp"
#include "certilind/solver.hpp"

namespace certilind {

enum ExitCode : int { exit_ok = 0, exit_model_error = 1, exit_certification_failure = 2 };

struct SimulateOverrides {
  std::optional<double> space_tol;
  std::optional<double> time_tol;
};

/// Sizes for a sweep: "4,5,6", "4..30", "8x4;10x5" or rational caps for
/// weighted shapes ("6,13/2,7").
inline std::vector<TruncationShape> parse_shape_list(const std::string& text, const TruncationShape& like) {
  std::vector<TruncationShape> out;
  static const std::regex range(R"(\s*(\d+)\s*\.\.\s*(\d+)\s*)");
  std::string tok;
  std::stringstream ss(text);
  std::vector<std::string> parts;
  while (std::getline(ss, tok, ';')) {
    std::stringstream inner(tok);
    std::string p;
    while (std::getline(inner, p, ',')) parts.push_back(p);
  }
  for (auto p : parts) {
    p.erase(0, p.find_first_not_of(" \t"));
    p.erase(p.find_last_not_of(" \t") + 1);
    if (p.empty()) continue;
    std::smatch m;
    if (!like.is_rect()) {
      if (std::regex_match(p, m, range)) {
        for (int b = std::stoi(m[1]); b <= std::stoi(m[2]); ++b) out.push_back(TruncationShape::weighted(like.weighted_cap().weights, Rational(b)));
      } else {
        out.push_back(TruncationShape::weighted(like.weighted_cap().weights, parse_rational(p)));
      }
      continue;
    }
    if (std::regex_match(p, m, range)) {
      if (like.mode_count() != 1) throw ModelError("ranges are only accepted for single-mode shapes");
      for (int n = std::stoi(m[1]); n <= std::stoi(m[2]); ++n) out.push_back(TruncationShape::rect({n}));
      continue;
    }
    std::vector<int> caps;
    std::stringstream cs(p);
    std::string c;
    while (std::getline(cs, c, 'x')) {
      try {
        std::size_t used = 0;
        caps.push_back(std::stoi(c, &used));
        if (c.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(c);
      } catch (const std::logic_error&) {
        throw ModelError("bad shape size '" + p + "'");
      }
    }
    if (static_cast<int>(caps.size()) != like.mode_count())
      throw ModelError("shape size '" + p + "' does not have " + std::to_string(like.mode_count()) + " modes");
    out.push_back(TruncationShape::rect(caps));
  }
  if (out.empty()) throw ModelError("empty shape list");
  return out;
}

struct SweepOutcome {
  std::vector<SweepRow> rows;
  std::vector<RunResult> runs;
  std::size_t reference = 0;
};

/// run_fixed over `shapes`; the largest shape is the reference.
inline SweepOutcome run_sweep(const LindbladModel& model, const DenseOperator& rho0, const std::vector<TruncationShape>& shapes,
                              const SolverConfig& cfg, int jobs = 1) {
  if (shapes.empty()) throw ModelError("empty sweep");
  SweepOutcome out;
  for (std::size_t i = 1; i < shapes.size(); ++i)
    if (shapes[i].dimension() > shapes[out.reference].dimension()) out.reference = i;
  const auto& ref = shapes[out.reference];
  for (const auto& s : shapes)
    if (!contains(s, ref)) throw ShapeError("sweep shape " + s.describe() + " is not inside the reference " + ref.describe());
  out.runs.resize(shapes.size(), RunResult{rho0, {}, {}, {}, 0});
  if (jobs <= 1) {
    for (std::size_t i = 0; i < shapes.size(); ++i) out.runs[i] = run_fixed(model, rho0, shapes[i], cfg);
  } else {
    for (std::size_t start = 0; start < shapes.size(); start += static_cast<std::size_t>(jobs)) {
      std::vector<std::future<RunResult>> batch;
      for (std::size_t i = start; i < std::min(shapes.size(), start + static_cast<std::size_t>(jobs)); ++i)
        batch.push_back(std::async(std::launch::async, [&, i] { return run_fixed(model, rho0, shapes[i], cfg); }));
      for (std::size_t k = 0; k < batch.size(); ++k) out.runs[start + k] = batch[k].get();
    }
  }
  const auto& rref = out.runs[out.reference].state;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto e = embed(out.runs[i].state, ref);
    double d = trace_norm_hermitian(e.m - rref.m);
    out.rows.push_back({shapes[i], out.runs[i].ledger.xi, d});
  }
  return out;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline int cmd_simulate(const ModelFile& file, const std::filesystem::path& out_dir, const SimulateOverrides& ov = {}) {
  ModelFile f = file;
  if (ov.space_tol) f.solver.space_tol = *ov.space_tol;
  if (ov.time_tol) f.solver.time_tol = *ov.time_tol;
  f.solver.validate();
  auto rho0 = initial_state(f);
  auto t0 = std::chrono::steady_clock::now();
  RunResult r = run(f.model, rho0, f.shape, f.solver, f.adaptive);
  write_run(out_dir, f.solver, r, seconds_since(t0));
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  return exit_ok;
}

inline int cmd_sweep(const ModelFile& f, const std::string& shapes, const std::filesystem::path& out_dir, int jobs = 1) {
  auto list = parse_shape_list(shapes, f.shape);
  auto rho0 = initial_state(f);
  auto res = run_sweep(f.model, rho0, list, f.solver, jobs);
  std::filesystem::create_directories(out_dir);
  detail::write_atomic(out_dir / "error_vs_N.csv", sweep_csv(res.rows));
  return exit_ok;
}

// ---------------------------------------------------------------------------
// Presets.

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"exampleA", "exampleB", "exampleC", "exampleD",
                                              "exampleE", "gkp",      "adaptive1d", "adaptive2d"};
  return names;
}

inline std::vector<TruncationShape> rect_range(int lo, int hi) {
  std::vector<TruncationShape> out;
  for (int n = lo; n <= hi; ++n) out.push_back(TruncationShape::rect({n}));
  return out;
}

inline SolverConfig cert_config(double T = 1.0) {
  SolverConfig c;
  c.T = T;
  c.scheme = Scheme::adaptive_rk;
  c.time_tol = 1e-14;
  return c;
}

/// Example E grid: N1 in {8,...,28} by N2 in {4,10,15}.
inline std::vector<TruncationShape> example_e_grid() {
  std::vector<TruncationShape> out;
  for (int n1 : {8, 12, 16, 20, 24, 28})
    for (int n2 : {4, 10, 15}) out.push_back(TruncationShape::rect({n1, n2}));
  return out;
}

inline LindbladModel adaptive2d_model() {
  return models::example_e(CoefficientFn::table({{0.0, 2.25}, {1.5, 0.0}}));
}

inline SolverConfig adaptive1d_config() {
  SolverConfig c = cert_config(1.0);
  c.space_tol = 1e-11;
  c.downsize_factor = 5.0;
  c.grow_step = std::vector<int>{4};
  c.shrink_step = std::vector<int>{4};
  c.max_dimension = 400;
  return c;
}

inline SolverConfig adaptive2d_config() {
  SolverConfig c = cert_config(10.0);
  c.space_tol = 1e-11;
  c.downsize_factor = 5.0;
  c.grow_step = Rational(7);
  c.shrink_step = Rational(5);
  c.max_dimension = 5000;
  return c;
}

inline double gkp_eta() { return 2.0 * std::sqrt(std::numbers::pi); }

inline int write_sweep(const std::filesystem::path& dir, const std::string& name, const SweepOutcome& s, std::ostream& log) {
  std::filesystem::create_directories(dir);
  detail::write_atomic(dir / name, sweep_csv(s.rows));
  log << "wrote " << (dir / name).string() << " (" << s.rows.size() << " rows, reference "
      << s.rows[s.reference].shape.describe() << ", xi_ref = " << s.rows[s.reference].xi_T << ")\n";
  return exit_ok;
}

inline int cmd_reproduce(const std::string& preset, const std::filesystem::path& out_root, std::ostream& log = std::cout) {
  const auto dir = out_root / preset;
  const auto one = TruncationShape::rect({0});
  if (preset == "exampleA") {
    auto rho0 = fock_state(TruncationShape::rect({2}), {2});
    return write_sweep(dir, "error_vs_N.csv", run_sweep(models::example_a(), rho0, rect_range(2, 20), cert_config()), log);
  }
  if (preset == "exampleB") {
    CoefficientFn u = CoefficientFn::expression("sin(t)", {}, 1.0, 1.0);
    SolverConfig c;
    c.T = 1.0;
    c.scheme = Scheme::euler;
    c.dt = 1e-3;
    c.enable_time_certificate = true;
    return write_sweep(dir, "error_vs_N.csv", run_sweep(models::example_b(u), fock_state(one, {0}), rect_range(4, 24), c), log);
  }
  if (preset == "exampleC") {
    return write_sweep(dir, "error_vs_N.csv",
                       run_sweep(models::example_c(1.0), fock_state(one, {0}), rect_range(4, 40), cert_config()), log);
  }
  if (preset == "exampleD") {
    return write_sweep(dir, "error_vs_N.csv",
                       run_sweep(models::example_d(1.0, 1.25), fock_state(one, {0}), rect_range(4, 40), cert_config()), log);
  }
  if (preset == "exampleE") {
    auto shapes = example_e_grid();
    shapes.push_back(TruncationShape::rect({40, 20}));
    auto rho0 = fock_state(TruncationShape::rect({0, 0}), {0, 0});
    return write_sweep(dir, "error_vs_N.csv", run_sweep(models::example_e(1.0), rho0, shapes, cert_config()), log);
  }
  if (preset == "gkp") {
    const double eps = 0.15, eta = gkp_eta();
    SolverConfig c;
    c.T = 2.0 / (eps * eta);
    c.scheme = Scheme::rk4;
    c.dt = 5e-4 * c.T;
    std::vector<TruncationShape> shapes;
    for (int n : {10, 15, 20, 25, 30, 40, 60}) shapes.push_back(TruncationShape::rect({n}));
    return write_sweep(dir, "error_vs_N.csv", run_sweep(models::gkp(1.0, eta, eps), fock_state(one, {0}), shapes, c), log);
  }
  if (preset == "adaptive1d") {
    auto cfg = adaptive1d_config();
    for (int start : {15, 55}) {
      auto s = TruncationShape::rect({start});
      auto t0 = std::chrono::steady_clock::now();
      auto r = run_adaptive(models::example_c(1.0), fock_state(s, {0}), cfg);
      write_run(dir, cfg, r, seconds_since(t0), "start" + std::to_string(start) + "_");
      log << "start " << start << ": final " << r.state.shape.describe() << ", xi = " << r.ledger.xi << "\n";
    }
    return exit_ok;
  }
  if (preset == "adaptive2d") {
    auto cfg = adaptive2d_config();
    auto s = TruncationShape::weighted({Rational(1, 2), Rational(1)}, Rational(6));
    auto t0 = std::chrono::steady_clock::now();
    auto r = run_adaptive(adaptive2d_model(), fock_state(s, {0, 0}), cfg);
    write_run(dir, cfg, r, seconds_since(t0));
    log << "final " << r.state.shape.describe() << ", xi = " << r.ledger.xi
        << ", shrink jumps = " << r.ledger.total(LedgerKind::shrink_jump) << "\n";
    return exit_ok;
  }
  throw ModelError("unknown preset '" + preset + "'");
}

}  // namespace certilind
