#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "smq/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Semi-Markov quantum dynamics toolkit"};
  app.require_subcommand(1);
  smq::cli::Overrides ov;
  std::string file;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run a scenario file");
  run->add_option("file", file, "Scenario JSON file")->required();
  run->add_option("--seed", ov.seed, "Override the random seed");
  run->add_option("--out", ov.out, "Override the output directory");
  run->add_option("--dt", ov.dt, "Override the grid step");
  run->add_option("--horizon", ov.horizon, "Override the time horizon");
  run->add_flag("--quiet", quiet, "Print only errors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const auto scenario = smq::cli::load_scenario(file, ov);
    const auto report = smq::cli::run(scenario, quiet ? nullptr : &std::cout);
    if (!quiet) {
      for (const auto& t : report.tasks) std::cout << t.name << ": " << smq::cli::to_string(t.status) << "\n";
      std::cout << "wrote " << report.files.size() << " files to " << scenario.output.string() << "\n";
      std::printf("wall time %.3f s\n", report.wall_seconds);
    }
    if (report.failed()) {
      for (const auto& t : report.tasks)
        if (t.status == smq::cli::Status::failed) std::cerr << "validation failed: " << t.name << "\n";
      return 1;
    }
    return 0;
  } catch (const smq::cli::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
