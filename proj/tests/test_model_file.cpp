#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "certilind/commands.hpp"
#include "certilind/model_file.hpp"
#include "certilind/output.hpp"

using namespace certilind;

namespace {

json cat_file() {
  return json::parse(R"J({
    "modes": 1,
    "params": {"alpha": 1.5},
    "shape": {"rect": [12]},
    "dissipators": ["a0^2 - alpha^2"],
    "initial": {"fock": 0},
    "solver": {"T": 0.5, "space_tol": 1e-6, "adaptive": true, "grow_step": 4}
  })J");
}

std::string model_error(const json& j) {
  try {
    model_file_from_json(j);
  } catch (const ModelError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("certilind_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(ModelFile, ParsesCatModel) {
  auto f = model_file_from_json(cat_file());
  EXPECT_EQ(f.model.modes, 1);
  EXPECT_EQ(f.shape, TruncationShape::rect({12}));
  ASSERT_EQ(f.model.dissipators.size(), 1u);
  EXPECT_EQ(std::get<PolyOperator>(f.model.dissipators[0]), std::get<PolyOperator>(models::example_c(1.5).dissipators[0]));
  EXPECT_TRUE(f.adaptive);
  EXPECT_EQ(f.solver.T, 0.5);
  EXPECT_EQ(std::get<std::vector<int>>(f.solver.grow_step), std::vector<int>{4});
  auto rho = initial_state(f);
  EXPECT_EQ(rho.m(0, 0), cd(1.0));
}

TEST(ModelFile, TwoModeWeightedWithTableCoefficient) {
  auto j = json::parse(R"J({
    "modes": 2,
    "shape": {"weighted": {"w": ["1/2", 1], "cap": 6}},
    "hamiltonian": [
      {"op": "a0^2*ad1 + a1*ad0^2"},
      {"coeff": {"table": [[0, -2.25], [1.5, 0]]}, "op": "ad1 + a1"}
    ],
    "dissipators": [{"op": "a1"}],
    "initial": {"fock": [0, 0]},
    "solver": {"T": 10, "grow_step": 7, "shrink_step": 5, "adaptive": true}
  })J");
  auto f = model_file_from_json(j);
  EXPECT_FALSE(f.shape.is_rect());
  EXPECT_EQ(std::get<Rational>(f.solver.grow_step), Rational(7));
  EXPECT_EQ(f.model.hamiltonian[1].coeff(1.0), cd(-2.25));
  EXPECT_EQ(f.model.hamiltonian[1].coeff(2.0), cd(0.0));
}

TEST(ModelFile, GkpAndCosineEntries) {
  auto g = json::parse(R"J({"modes": 1, "shape": {"rect": [20]},
    "dissipators": [{"gkp": {"A": 0.9, "eta": "2*sqrt(pi)", "eps": 0.1}}], "initial": {"fock": 0}})J");
  auto f = model_file_from_json(g);
  ASSERT_EQ(f.model.dissipators.size(), 4u);
  EXPECT_EQ(std::get<GkpGamma>(f.model.dissipators[3]).k, 3);
  EXPECT_NEAR(std::get<GkpGamma>(f.model.dissipators[0]).eta, 2.0 * std::sqrt(M_PI), 1e-15);
  auto c = json::parse(R"J({"modes": 1, "shape": {"rect": [20]},
    "hamiltonian": [{"coeff": 0.5, "op": {"cosine": {"q": [1.5]}}}], "initial": {"fock": 0}})J");
  auto fc = model_file_from_json(c);
  EXPECT_EQ(std::get<CosineArg>(fc.model.hamiltonian[0].op).o.q, std::vector<double>{1.5});
}

TEST(ModelFile, RoundTripPreservesTheModel) {
  auto j = json::parse(R"J({
    "modes": 2,
    "params": {"u": 0.3},
    "shape": {"rect": [6, 3]},
    "hamiltonian": [
      {"coeff": "u", "op": "a0^2*ad1 + a1*ad0^2"},
      {"coeff": {"expr": "sin(t)", "sup": 1, "dsup": 1}, "op": "ad1 + a1"}
    ],
    "dissipators": ["a1", "0.1*a0"],
    "initial": {"fock": [1, 0]},
    "solver": {"scheme": "euler", "dt": 0.001, "time_certificate": true}
  })J");
  auto f = model_file_from_json(j);
  auto again = model_file_from_json(model_file_to_json(f));
  EXPECT_EQ(model_file_to_json(again), model_file_to_json(f));
  ASSERT_EQ(again.model.hamiltonian.size(), 2u);
  EXPECT_EQ(std::get<PolyOperator>(again.model.hamiltonian[0].op), std::get<PolyOperator>(f.model.hamiltonian[0].op));
  EXPECT_EQ(again.model.hamiltonian[1].coeff(0.4), f.model.hamiltonian[1].coeff(0.4));
  EXPECT_EQ(*again.model.hamiltonian[1].coeff.derivative_sup_bound, 1.0);
  EXPECT_EQ(again.solver.scheme, Scheme::euler);
  EXPECT_TRUE(again.solver.enable_time_certificate);
}

TEST(ModelFile, RejectsUnknownKeysAndBadTokens) {
  auto j = cat_file();
  j["solver"]["tolerance"] = 1;
  EXPECT_NE(model_error(j).find("'tolerance'"), std::string::npos);
  j = cat_file();
  j["dissipators"][0] = "a0^2 - beta";
  EXPECT_NE(model_error(j).find("'beta'"), std::string::npos);
  j = cat_file();
  j["params"]["t"] = 1.0;
  EXPECT_NE(model_error(j).find("reserved"), std::string::npos);
  j = cat_file();
  j["shape"] = json::parse(R"J({"rect": [4, 4]})J");
  EXPECT_NE(model_error(j).find("mode count"), std::string::npos);
  j = cat_file();
  j.erase("initial");
  EXPECT_NE(model_error(j).find("initial"), std::string::npos);
  j = cat_file();
  j["solver"]["scheme"] = "leapfrog";
  EXPECT_NE(model_error(j).find("leapfrog"), std::string::npos);
  j = cat_file();
  j["initial"] = json::parse(R"J({"fock": 40})J");
  EXPECT_THROW(initial_state(model_file_from_json(j)), ModelError);
}

TEST(ModelFile, MatrixInitialStateFromDisk) {
  auto dir = scratch("matrix");
  Matrix rho = Matrix::Zero(3, 3);
  rho(0, 0) = 0.25;
  rho(1, 1) = 0.75;
  rho(0, 1) = cd(0.1, 0.2);
  rho(1, 0) = cd(0.1, -0.2);
  json mj = matrix_to_json(rho);
  mj["shape"] = json::parse(R"J({"rect": [2]})J");
  std::ofstream(dir / "rho0.json") << mj.dump();
  auto j = cat_file();
  j["initial"] = json::parse(R"J({"matrix": "rho0.json"})J");
  std::ofstream(dir / "model.json") << j.dump();
  auto f = load_model_file((dir / "model.json").string());
  auto r = initial_state(f);
  EXPECT_EQ(r.shape, TruncationShape::rect({2}));
  EXPECT_EQ(r.m, rho);
}

TEST(ModelFile, MalformedJsonIsAModelError) {
  auto dir = scratch("bad");
  std::ofstream(dir / "bad.json") << "{\"modes\": 1,";
  EXPECT_THROW(load_model_file((dir / "bad.json").string()), ModelError);
  EXPECT_THROW(load_model_file((dir / "missing.json").string()), ModelError);
}

TEST(ShapeList, ParsesAllForms) {
  auto one = TruncationShape::rect({4});
  auto v = parse_shape_list("4..7", one);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v.back(), TruncationShape::rect({7}));
  EXPECT_EQ(parse_shape_list("3, 5", one).size(), 2u);
  auto two = parse_shape_list("8x4;10x5", TruncationShape::rect({1, 1}));
  EXPECT_EQ(two[1], TruncationShape::rect({10, 5}));
  auto w = TruncationShape::weighted({Rational(1, 2), Rational(1)}, Rational(2));
  auto ws = parse_shape_list("6,13/2", w);
  EXPECT_EQ(ws[1].weighted_cap().cap, Rational(13, 2));
  EXPECT_THROW(parse_shape_list("8y4", TruncationShape::rect({1, 1})), ModelError);
  EXPECT_THROW(parse_shape_list("", one), ModelError);
}

TEST(Outputs, SimulateWritesAllFiles) {
  auto dir = scratch("simulate");
  auto f = model_file_from_json(cat_file());
  EXPECT_EQ(cmd_simulate(f, dir), 0);
  for (const char* name : {"trajectory.csv", "ledger.csv", "final_state.json", "summary.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  std::ifstream in(dir / "summary.json");
  json s = json::parse(in);
  EXPECT_LT(s["xi"].get<double>(), 1e-6);
  EXPECT_EQ(s["T"].get<double>(), 0.5);
  std::ifstream tr(dir / "trajectory.csv");
  std::string header;
  std::getline(tr, header);
  EXPECT_EQ(header, "t,dim,trace_re,xi,defect_rate,accepted,resize");
}

TEST(Outputs, SweepWritesErrorTable) {
  auto dir = scratch("sweep");
  auto j = cat_file();
  j["solver"]["adaptive"] = false;
  auto f = model_file_from_json(j);
  EXPECT_EQ(cmd_sweep(f, "6,8,12", dir), 0);
  std::ifstream in(dir / "error_vs_N.csv");
  std::string header, row;
  std::getline(in, header);
  EXPECT_EQ(header, "N,xi_T,dist_to_ref");
  int rows = 0;
  while (std::getline(in, row)) ++rows;
  EXPECT_EQ(rows, 3);
  auto rho0 = initial_state(f);
  auto res = run_sweep(f.model, rho0, parse_shape_list("6,8,12", f.shape), f.solver);
  const double xi_ref = res.rows[res.reference].xi_T;
  for (const auto& r : res.rows) EXPECT_LE(r.dist_to_ref, r.xi_T + xi_ref);
}

TEST(Outputs, SpaceToleranceOverrideReachesSummary) {
  auto dir = scratch("override");
  SimulateOverrides ov;
  ov.space_tol = 1e-4;
  EXPECT_EQ(cmd_simulate(model_file_from_json(cat_file()), dir, ov), 0);
  std::ifstream in(dir / "summary.json");
  json s = json::parse(in);
  EXPECT_EQ(s["space_tol"].get<double>(), 1e-4);
}

TEST(Outputs, CertificationFailureIsReported) {
  auto j = cat_file();
  j["solver"]["space_tol"] = 1e-14;
  j["solver"]["max_dimension"] = 20;
  EXPECT_THROW(cmd_simulate(model_file_from_json(j), scratch("fail")), CertificationError);
}
