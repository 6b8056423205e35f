#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "certilind/errors.hpp"
#include "certilind/model_file.hpp"
#include "certilind/solver.hpp"

namespace certilind {

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes through a temporary file and renames it into place.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline std::string trajectory_csv(const std::vector<TrajectoryRecord>& traj) {
  std::string s = "t,dim,trace_re,xi,defect_rate,accepted,resize\n";
  for (const auto& r : traj) {
    s += detail::num(r.t) + "," + std::to_string(r.dim) + "," + detail::num(r.trace) + "," + detail::num(r.xi) + "," +
         detail::num(r.defect_rate) + "," + (r.accepted ? "1" : "0") + "," + to_string(r.resize) + "\n";
  }
  return s;
}

inline std::string ledger_csv(const EstimatorLedger& ledger) {
  std::string s = "time,kind,value\n";
  for (const auto& e : ledger.breakdown) s += detail::num(e.time) + "," + to_string(e.kind) + "," + detail::num(e.value) + "\n";
  return s;
}

inline nlohmann::json state_json(const DenseOperator& rho) {
  auto j = matrix_to_json(rho.m);
  j["shape"] = detail::shape_json(rho.shape);
  return j;
}

inline nlohmann::json summary_json(const SolverConfig& cfg, const RunResult& r, double wall_seconds) {
  nlohmann::json j;
  j["T"] = cfg.T;
  j["xi"] = r.ledger.xi;
  j["final_dim"] = r.state.dimension();
  j["final_shape"] = r.state.shape.describe();
  j["wall_time_s"] = wall_seconds;
  j["space_tol"] = cfg.space_tol;
  j["time_tol"] = cfg.time_tol;
  j["scheme"] = to_string(cfg.scheme);
  j["steps"] = r.accepted_steps;
  j["trace"] = r.state.m.trace().real();
  nlohmann::json parts = nlohmann::json::object();
  for (auto k : {LedgerKind::space_defect, LedgerKind::shrink_jump, LedgerKind::init_projection, LedgerKind::time_taylor,
                 LedgerKind::time_euler})
    parts[to_string(k)] = r.ledger.total(k);
  j["xi_breakdown"] = parts;
  j["warnings"] = r.warnings;
  return j;
}

/// trajectory.csv, ledger.csv, final_state.json and summary.json in `dir`.
inline void write_run(const std::filesystem::path& dir, const SolverConfig& cfg, const RunResult& r, double wall_seconds,
                      const std::string& prefix = "") {
  std::filesystem::create_directories(dir);
  detail::write_atomic(dir / (prefix + "trajectory.csv"), trajectory_csv(r.trajectory));
  detail::write_atomic(dir / (prefix + "ledger.csv"), ledger_csv(r.ledger));
  detail::write_atomic(dir / (prefix + "final_state.json"), state_json(r.state).dump() + "\n");
  detail::write_atomic(dir / (prefix + "summary.json"), summary_json(cfg, r, wall_seconds).dump(2) + "\n");
}

struct SweepRow {
  TruncationShape shape;
  double xi_T;
  double dist_to_ref;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  if (rows.empty()) return "N,xi_T,dist_to_ref\n";
  const int modes = rows.front().shape.mode_count();
  if (!rows.front().shape.is_rect()) {
    std::string s = "B,xi_T,dist_to_ref\n";
    for (const auto& r : rows)
      s += to_string(r.shape.weighted_cap().cap) + "," + detail::num(r.xi_T) + "," + detail::num(r.dist_to_ref) + "\n";
    return s;
  }
  std::string s;
  for (int m = 0; m < modes; ++m) s += (modes == 1 ? std::string("N") : "N" + std::to_string(m + 1)) + ",";
  s += "xi_T,dist_to_ref\n";
  for (const auto& r : rows) {
    for (int c : r.shape.rect_caps().caps) s += std::to_string(c) + ",";
    s += detail::num(r.xi_T) + "," + detail::num(r.dist_to_ref) + "\n";
  }
  return s;
}

}  // namespace certilind
