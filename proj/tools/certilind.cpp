#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "certilind/certilind.hpp"

using namespace certilind;

int main(int argc, char** argv) {
  CLI::App app{"certilind: Lindblad simulation in truncated Fock spaces with certified truncation error bounds"};
  app.require_subcommand(1);

  std::string model_path, out_dir = "out", shapes, preset;
  std::optional<double> space_tol, time_tol;
  int jobs = 1;

  auto* sim = app.add_subcommand("simulate", "run one model file");
  sim->add_option("file", model_path, "model file (JSON)")->required();
  sim->add_option("--out", out_dir, "output directory");
  sim->add_option("--space-tol", space_tol, "override solver.space_tol");
  sim->add_option("--time-tol", time_tol, "override solver.time_tol");

  auto* sweep = app.add_subcommand("sweep", "run a model over several truncations");
  sweep->add_option("file", model_path, "model file (JSON)")->required();
  sweep->add_option("--shapes", shapes, "sizes: \"4,5,6\", \"4..30\" or \"8x4;10x5\"")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--jobs", jobs, "sweep points run concurrently")->check(CLI::PositiveNumber);

  auto* rep = app.add_subcommand("reproduce", "run a built-in preset");
  rep->add_option("preset", preset, "preset name; 'list' prints them")->required();
  rep->add_option("--out", out_dir, "output root directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(load_model_file(model_path), out_dir, {space_tol, time_tol});
    if (*sweep) return cmd_sweep(load_model_file(model_path), shapes, out_dir, jobs);
    if (*rep) {
      if (preset == "list") {
        for (const auto& n : preset_names()) std::cout << n << "\n";
        return exit_ok;
      }
      return cmd_reproduce(preset, out_dir);
    }
  } catch (const CertificationError& e) {
    std::cerr << "certification failure: " << e.what() << "\n";
    return exit_certification_failure;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_model_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_model_error;
  }
  return exit_ok;
}
