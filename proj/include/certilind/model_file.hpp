#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "certilind/expression.hpp"
#include "certilind/fockspace.hpp"
#include "certilind/lindblad.hpp"
#include "certilind/models.hpp"
#include "certilind/solver.hpp"

namespace certilind {

using json = nlohmann::json;

struct InitialSpec {
  std::optional<MultiIndex> fock;
  std::string matrix_path;
};

struct ModelFile {
  LindbladModel model;
  TruncationShape shape = TruncationShape::rect({1});
  InitialSpec initial;
  SolverConfig solver;
  bool adaptive = false;
  std::string base_dir = ".";
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ModelError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ModelError("unknown key '" + k + "' in " + where);
}

inline double number_field(const json& j, const ParamTable& params, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    auto e = parse_scalar(j.get<std::string>(), params);
    if (e.time_dependent) throw ModelError(where + " cannot depend on t");
    cd v = e.fn(0.0);
    if (v.imag() != 0.0) throw ModelError(where + " must be real");
    return v.real();
  }
  throw ModelError(where + " must be a number or an expression string");
}

inline Rational rational_field(const json& j, const std::string& where) {
  if (j.is_number_integer()) return Rational(j.get<std::int64_t>());
  if (j.is_string()) return parse_rational(j.get<std::string>());
  throw ModelError(where + " must be an integer or a rational string such as \"1/2\"");
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline TruncationShape parse_shape(const json& j) {
  check_keys(j, {"rect", "weighted"}, "shape");
  if (j.contains("rect") == j.contains("weighted")) throw ModelError("shape needs exactly one of 'rect' or 'weighted'");
  if (j.contains("rect")) {
    if (!j["rect"].is_array()) throw ModelError("shape.rect must be a list of caps");
    return TruncationShape::rect(j["rect"].get<std::vector<int>>());
  }
  const auto& w = j["weighted"];
  check_keys(w, {"w", "cap"}, "shape.weighted");
  if (!w.contains("w") || !w.contains("cap")) throw ModelError("shape.weighted needs 'w' and 'cap'");
  std::vector<Rational> weights;
  for (const auto& x : w["w"]) weights.push_back(rational_field(x, "shape.weighted.w"));
  return TruncationShape::weighted(weights, rational_field(w["cap"], "shape.weighted.cap"));
}

inline json shape_json(const TruncationShape& s) {
  if (s.is_rect()) return {{"rect", s.rect_caps().caps}};
  json w = json::array();
  for (const auto& x : s.weighted_cap().weights) w.push_back(to_string(x));
  return {{"weighted", {{"w", w}, {"cap", to_string(s.weighted_cap().cap)}}}};
}

inline ShapeStep parse_step(const json& j, const TruncationShape& shape, const std::string& where) {
  if (shape.is_rect()) {
    if (j.is_number_integer()) return std::vector<int>(shape.mode_count(), j.get<int>());
    if (j.is_array()) {
      auto v = j.get<std::vector<int>>();
      if (static_cast<int>(v.size()) != shape.mode_count()) throw ModelError(where + " has the wrong number of modes");
      return v;
    }
    throw ModelError(where + " must be an integer or a list of integers");
  }
  return rational_field(j, where);
}

inline json step_json(const ShapeStep& s) {
  if (const auto* v = std::get_if<std::vector<int>>(&s)) return *v;
  return to_string(std::get<Rational>(s));
}

inline CoefficientFn parse_coeff(const json& j, const ParamTable& params) {
  if (j.is_number()) return CoefficientFn::constant_value(j.get<double>());
  if (j.is_string()) return CoefficientFn::expression(j.get<std::string>(), params, std::nullopt, std::nullopt);
  check_keys(j, {"expr", "sup", "dsup", "table"}, "coeff");
  if (j.contains("table")) {
    if (j.size() != 1) throw ModelError("coeff.table cannot be combined with other keys");
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : j["table"]) {
      if (!p.is_array() || p.size() != 2) throw ModelError("coeff.table entries are [t, value] pairs");
      pts.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    return CoefficientFn::table(pts);
  }
  if (!j.contains("expr")) throw ModelError("coeff object needs 'expr' or 'table'");
  std::optional<double> sup, dsup;
  if (j.contains("sup")) sup = number_field(j["sup"], params, "coeff.sup");
  if (j.contains("dsup")) dsup = number_field(j["dsup"], params, "coeff.dsup");
  return CoefficientFn::expression(j["expr"].get<std::string>(), params, sup, dsup);
}

inline json coeff_json(const CoefficientFn& c) {
  if (!c.table_points.empty()) {
    json t = json::array();
    for (const auto& [ti, vi] : c.table_points) t.push_back({ti, vi});
    return {{"table", t}};
  }
  json out = {{"expr", c.source}};
  if (!c.constant) {
    if (c.sup_norm_bound) out["sup"] = *c.sup_norm_bound;
    if (c.derivative_sup_bound) out["dsup"] = *c.derivative_sup_bound;
  }
  return out;
}

inline LinearQuadrature parse_quadrature(const json& j, int modes, const ParamTable& params) {
  check_keys(j, {"q", "p"}, "cosine");
  LinearQuadrature o;
  o.q.assign(modes, 0.0);
  o.p.assign(modes, 0.0);
  auto fill = [&](const char* key, std::vector<double>& v) {
    if (!j.contains(key)) return;
    if (!j[key].is_array() || static_cast<int>(j[key].size()) != modes)
      throw ModelError(std::string("cosine.") + key + " must list one coefficient per mode");
    for (int m = 0; m < modes; ++m) v[m] = number_field(j[key][m], params, std::string("cosine.") + key);
  };
  fill("q", o.q);
  fill("p", o.p);
  return o;
}

inline GkpGamma parse_gkp(const json& j, const ParamTable& params, int k) {
  GkpGamma g;
  g.k = k;
  g.A = j.contains("A") ? number_field(j["A"], params, "gkp.A") : 1.0;
  if (!j.contains("eta") || !j.contains("eps")) throw ModelError("gkp needs 'eta' and 'eps'");
  g.eta = number_field(j["eta"], params, "gkp.eta");
  g.eps = number_field(j["eps"], params, "gkp.eps");
  return g;
}

inline MultiIndex parse_index(const json& j) {
  if (j.is_number_integer()) return {j.get<int>()};
  if (j.is_array()) return j.get<std::vector<int>>();
  throw ModelError("initial.fock must be an integer or a list of integers");
}

}  // namespace detail

/// Dense complex matrix from {"dim": n, "data": [[re, im], ...]} (row-major).
inline Matrix matrix_from_json(const json& j) {
  detail::check_keys(j, {"dim", "data", "shape"}, "matrix file");
  const auto n = j.at("dim").get<Eigen::Index>();
  const auto& d = j.at("data");
  if (!d.is_array() || static_cast<Eigen::Index>(d.size()) != n * n) throw ModelError("matrix data must hold dim*dim entries");
  Matrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto& e = d[static_cast<std::size_t>(r * n + c)];
      if (!e.is_array() || e.size() != 2) throw ModelError("matrix entries must be [re, im] pairs");
      m(r, c) = cd(e[0].get<double>(), e[1].get<double>());
    }
  return m;
}

inline json matrix_to_json(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back({m(r, c).real(), m(r, c).imag()});
  return {{"dim", m.rows()}, {"data", data}};
}

inline ModelFile model_file_from_json(const json& j, const std::string& base_dir = ".") {
  using namespace detail;
  check_keys(j, {"modes", "params", "shape", "hamiltonian", "dissipators", "initial", "solver"}, "model file");
  ModelFile f;
  f.base_dir = base_dir;
  if (!j.contains("modes") || !j["modes"].is_number_integer()) throw ModelError("'modes' must be an integer");
  const int modes = j["modes"].get<int>();
  if (modes < 1) throw ModelError("'modes' must be positive");
  f.model.modes = modes;
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw ModelError("'params' must be an object");
    for (const auto& [k, v] : j["params"].items()) {
      if (expr::is_reserved_name(k)) throw ModelError("parameter name '" + k + "' is reserved");
      if (!v.is_number()) throw ModelError("parameter '" + k + "' must be a number");
      f.model.params[k] = v.get<double>();
    }
  }
  const auto& params = f.model.params;
  if (!j.contains("shape")) throw ModelError("'shape' is required");
  f.shape = parse_shape(j["shape"]);
  if (f.shape.mode_count() != modes) throw ModelError("shape mode count differs from 'modes'");

  if (j.contains("hamiltonian")) {
    for (const auto& h : j["hamiltonian"]) {
      check_keys(h, {"coeff", "op"}, "hamiltonian term");
      if (!h.contains("op")) throw ModelError("hamiltonian term needs 'op'");
      CoefficientFn c = h.contains("coeff") ? parse_coeff(h["coeff"], params) : CoefficientFn::constant_value(1.0);
      const auto& op = h["op"];
      if (op.is_string()) {
        f.model.hamiltonian.push_back({c, parse_poly(op.get<std::string>(), modes, params)});
      } else {
        check_keys(op, {"cosine"}, "hamiltonian op");
        if (!op.contains("cosine")) throw ModelError("hamiltonian op must be a string or {\"cosine\": ...}");
        f.model.hamiltonian.push_back({c, CosineArg{parse_quadrature(op["cosine"], modes, params)}});
      }
    }
  }
  if (j.contains("dissipators")) {
    for (const auto& d : j["dissipators"]) {
      if (d.is_string()) {
        f.model.dissipators.push_back(parse_poly(d.get<std::string>(), modes, params));
        continue;
      }
      check_keys(d, {"op", "gkp"}, "dissipator");
      if (d.contains("op")) {
        f.model.dissipators.push_back(parse_poly(d["op"].get<std::string>(), modes, params));
      } else if (d.contains("gkp")) {
        const auto& g = d["gkp"];
        check_keys(g, {"A", "eta", "eps", "k"}, "gkp");
        if (g.contains("k")) {
          f.model.dissipators.push_back(parse_gkp(g, params, g["k"].get<int>()));
        } else {
          for (int k = 0; k < 4; ++k) f.model.dissipators.push_back(parse_gkp(g, params, k));
        }
      } else {
        throw ModelError("dissipator must be a string, {\"op\": ...} or {\"gkp\": ...}");
      }
    }
  }
  f.model.validate();

  if (!j.contains("initial")) throw ModelError("'initial' is required");
  const auto& ini = j["initial"];
  check_keys(ini, {"fock", "matrix"}, "initial");
  if (ini.contains("fock") == ini.contains("matrix")) throw ModelError("initial needs exactly one of 'fock' or 'matrix'");
  if (ini.contains("fock")) f.initial.fock = parse_index(ini["fock"]);
  else f.initial.matrix_path = ini["matrix"].get<std::string>();

  if (j.contains("solver")) {
    const auto& s = j["solver"];
    check_keys(s,
               {"T", "scheme", "order", "dt", "time_tol", "space_tol", "adaptive", "downsize_factor", "grow_step",
                "shrink_step", "max_dimension", "time_certificate", "closed_space"},
               "solver");
    auto& c = f.solver;
    if (s.contains("T")) c.T = number_field(s["T"], params, "solver.T");
    if (s.contains("scheme")) c.scheme = parse_scheme(s["scheme"].get<std::string>());
    if (s.contains("order")) c.taylor_order = s["order"].get<int>();
    if (s.contains("dt")) c.dt = number_field(s["dt"], params, "solver.dt");
    if (s.contains("time_tol")) c.time_tol = number_field(s["time_tol"], params, "solver.time_tol");
    if (s.contains("space_tol")) c.space_tol = number_field(s["space_tol"], params, "solver.space_tol");
    if (s.contains("adaptive")) f.adaptive = s["adaptive"].get<bool>();
    if (s.contains("downsize_factor")) c.downsize_factor = number_field(s["downsize_factor"], params, "solver.downsize_factor");
    c.grow_step = s.contains("grow_step") ? parse_step(s["grow_step"], f.shape, "solver.grow_step")
                                          : parse_step(json(4), f.shape, "solver.grow_step");
    c.shrink_step = s.contains("shrink_step") ? parse_step(s["shrink_step"], f.shape, "solver.shrink_step")
                                              : parse_step(json(4), f.shape, "solver.shrink_step");
    if (s.contains("max_dimension")) c.max_dimension = s["max_dimension"].get<std::size_t>();
    if (s.contains("time_certificate")) c.enable_time_certificate = s["time_certificate"].get<bool>();
    if (s.contains("closed_space")) c.closed_space = s["closed_space"].get<bool>();
  } else {
    f.solver.grow_step = parse_step(json(4), f.shape, "solver.grow_step");
    f.solver.shrink_step = parse_step(json(4), f.shape, "solver.shrink_step");
  }
  f.solver.validate();
  return f;
}

inline ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open model file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelError("malformed model file '" + path + "': " + e.what());
  }
  auto slash = path.find_last_of('/');
  return model_file_from_json(j, slash == std::string::npos ? "." : path.substr(0, slash));
}

inline json model_file_to_json(const ModelFile& f) {
  using namespace detail;
  json j;
  j["modes"] = f.model.modes;
  j["params"] = json::object();
  for (const auto& [k, v] : f.model.params) j["params"][k] = v;
  j["shape"] = shape_json(f.shape);
  j["hamiltonian"] = json::array();
  for (const auto& h : f.model.hamiltonian) {
    json op;
    if (const auto* p = std::get_if<PolyOperator>(&h.op)) {
      op = format_poly(*p);
    } else {
      const auto& o = std::get<CosineArg>(h.op).o;
      op = {{"cosine", {{"q", o.q}, {"p", o.p}}}};
    }
    j["hamiltonian"].push_back({{"coeff", coeff_json(h.coeff)}, {"op", op}});
  }
  j["dissipators"] = json::array();
  for (const auto& d : f.model.dissipators) {
    if (const auto* p = std::get_if<PolyOperator>(&d)) {
      j["dissipators"].push_back(format_poly(*p));
    } else {
      const auto& g = std::get<GkpGamma>(d);
      j["dissipators"].push_back({{"gkp", {{"A", g.A}, {"eta", g.eta}, {"eps", g.eps}, {"k", g.k}}}});
    }
  }
  if (f.initial.fock) j["initial"] = {{"fock", *f.initial.fock}};
  else j["initial"] = {{"matrix", f.initial.matrix_path}};
  const auto& c = f.solver;
  j["solver"] = {{"T", c.T},
                 {"scheme", to_string(c.scheme)},
                 {"order", c.taylor_order},
                 {"dt", c.dt},
                 {"time_tol", c.time_tol},
                 {"space_tol", c.space_tol},
                 {"adaptive", f.adaptive},
                 {"downsize_factor", c.downsize_factor},
                 {"grow_step", step_json(c.grow_step)},
                 {"shrink_step", step_json(c.shrink_step)},
                 {"max_dimension", c.max_dimension},
                 {"time_certificate", c.enable_time_certificate},
                 {"closed_space", c.closed_space}};
  return j;
}

/// The initial density matrix on the file's shape (or on the matrix's own
/// size when a matrix file is given).
inline DenseOperator initial_state(const ModelFile& f) {
  if (f.initial.fock) {
    if (static_cast<int>(f.initial.fock->size()) != f.model.modes) throw ModelError("initial.fock has the wrong number of modes");
    if (!f.shape.admits(*f.initial.fock)) throw ModelError("initial Fock state lies outside the shape");
    return fock_state(f.shape, *f.initial.fock);
  }
  std::string path = f.initial.matrix_path;
  if (!path.empty() && path[0] != '/') path = f.base_dir + "/" + path;
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open initial matrix '" + path + "'");
  json j = json::parse(in);
  Matrix m = matrix_from_json(j);
  TruncationShape s = j.contains("shape") ? detail::parse_shape(j["shape"]) : f.shape;
  if (static_cast<Eigen::Index>(s.dimension()) != m.rows())
    throw ModelError("initial matrix has dimension " + std::to_string(m.rows()) + ", shape " + s.describe() + " needs " +
                     std::to_string(s.dimension()));
  return DenseOperator(s, m);
}

}  // namespace certilind
