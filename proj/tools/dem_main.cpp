// Command-line front end: run / sweep / converge / verify / kernel over
// scenario files.  Exit codes: 0 ok, 1 validation, 2 numerical-check
// failure, 3 I/O.

#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dem/scenario.hpp"

namespace {

struct CommonFlags {
  std::string out_dir = ".";
  bool quiet = false;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--out", flags.out_dir, "Output directory")
      ->capture_default_str();
  cmd->add_flag("--quiet", flags.quiet, "Suppress progress output");
  cmd->add_option("--threads", flags.threads,
                  "Worker threads for independent sweep points")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Exact open-system dynamics on a discretized bath: run scenarios, "
      "sweep parameters, check convergence, verify against an independent "
      "integrator, and export the memory-kernel comparison."};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string scenario_path;
  std::string axis;
  std::vector<double> values, nmax_list, wmax_list;

  CLI::App* cmd_run =
      app.add_subcommand("run", "Simulate one scenario; write CSV + manifest");
  cmd_run->add_option("scenario", scenario_path, "Scenario JSON file")
      ->required();
  add_common(cmd_run, flags);

  CLI::App* cmd_sweep = app.add_subcommand(
      "sweep", "Run a family of scenarios along one parameter axis");
  cmd_sweep->add_option("scenario", scenario_path, "Scenario JSON file")
      ->required();
  cmd_sweep->add_option("--axis", axis, "Swept parameter")
      ->required()
      ->check(CLI::IsMember({"g0", "gamma", "temperature"}));
  cmd_sweep->add_option("--values", values, "Comma-separated axis values")
      ->required()
      ->delimiter(',');
  add_common(cmd_sweep, flags);

  CLI::App* cmd_converge = app.add_subcommand(
      "converge", "Difference successive bath grids on one scenario");
  cmd_converge->add_option("scenario", scenario_path, "Scenario JSON file")
      ->required();
  cmd_converge
      ->add_option("--nmax-list", nmax_list,
                   "Comma-separated mode counts to compare")
      ->delimiter(',');
  cmd_converge
      ->add_option("--wmax-list", wmax_list,
                   "Comma-separated frequency cutoffs to compare")
      ->delimiter(',');
  add_common(cmd_converge, flags);

  CLI::App* cmd_verify = app.add_subcommand(
      "verify", "Unitarity / conservation / independent-integrator checks");
  cmd_verify->add_option("scenario", scenario_path, "Scenario JSON file")
      ->required();
  add_common(cmd_verify, flags);

  CLI::App* cmd_kernel = app.add_subcommand(
      "kernel", "Export the discrete-vs-analytic kernel comparison CSV");
  cmd_kernel->add_option("scenario", scenario_path, "Scenario JSON file")
      ->required();
  add_common(cmd_kernel, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // bad usage is a validation failure
  }

  try {
    const std::filesystem::path out_dir = flags.out_dir;
    if (cmd_run->parsed()) {
      const auto art = dem::run_scenario(scenario_path, out_dir, flags.quiet);
      if (!flags.quiet)
        std::cout << "wrote " << art.trajectory_csv.string() << " and "
                  << art.manifest_path.string() << "\n";
      return 0;
    }
    if (cmd_sweep->parsed()) {
      dem::SweepAxis ax = dem::SweepAxis::G0;
      if (axis == "gamma") ax = dem::SweepAxis::Gamma;
      if (axis == "temperature") ax = dem::SweepAxis::Temperature;
      const auto summary =
          dem::sweep(dem::load_scenario(scenario_path), ax, values, out_dir,
                     flags.threads, flags.quiet);
      std::cout << summary.dump(2) << "\n";
      return 0;
    }
    if (cmd_converge->parsed()) {
      if (nmax_list.empty() == wmax_list.empty())
        throw dem::SchemaError(
            "converge: give exactly one of --nmax-list or --wmax-list");
      const auto axis_kind = nmax_list.empty() ? dem::ConvergeAxis::OmegaMax
                                               : dem::ConvergeAxis::NMax;
      const auto& list = nmax_list.empty() ? wmax_list : nmax_list;
      const auto report = dem::converge(dem::load_scenario(scenario_path),
                                        axis_kind, list, out_dir, flags.quiet);
      std::cout << report.dump(2) << "\n";
      return 0;
    }
    if (cmd_verify->parsed()) {
      const auto result =
          dem::verify(dem::load_scenario(scenario_path), out_dir, flags.quiet);
      std::cout << result.report.dump(2) << "\n";
      return result.pass ? 0 : 2;
    }
    if (cmd_kernel->parsed()) {
      const auto path =
          dem::kernel_command(dem::load_scenario(scenario_path), out_dir);
      if (!flags.quiet) std::cout << "wrote " << path.string() << "\n";
      return 0;
    }
  } catch (const dem::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dem::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const dem::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
