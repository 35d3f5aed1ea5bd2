#pragma once

// Declarative scenario files for the command-line front end.
//
// A scenario is a JSON object with the keys
//   model      {"name": pauli|weyl|gellmann|collision|markov|classical|probe, ...}
//   grid       {"dt": <real>, "horizon": <real>}
//   tasks      [validate|propagate|kernel|classical-compare|trajectories|povm-check|probe-scan]
//   output     output directory (default "out")
//   seed       unsigned integer (default 1)
//   tolerances {"cp", "trace", "residual_factor"}
// and optional per-task sections "propagate", "kernel", "trajectories",
// "povm". Unknown keys are errors. See README.md for the full schema.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smq/error.hpp"
#include "smq/grid.hpp"
#include "smq/timeseries.hpp"

namespace smq::cli {

using json = nlohmann::ordered_json;

/// Malformed or inconsistent scenario; maps to exit status 2.
class ParseError : public Error {
 public:
  using Error::Error;
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<double> dt;
  std::optional<double> horizon;
};

struct Tolerances {
  double cp = 1e-6;
  double trace = 1e-6;
  double residual_factor = 5.0;
};

struct Scenario {
  json model;  // validated model section
  std::string model_name;
  double dt = 0.01;
  double horizon = 5.0;
  std::vector<std::string> tasks;
  std::filesystem::path output = "out";
  std::uint64_t seed = 1;
  Tolerances tol;
  json propagate = json::object();
  json kernel = json::object();
  json trajectories = json::object();
  json povm = json::object();

  TimeGrid grid() const { return TimeGrid::over(horizon, dt); }
};

Scenario parse_scenario(const std::string& text, const Overrides& overrides = {});
Scenario load_scenario(const std::filesystem::path& file, const Overrides& overrides = {});

enum class Status { ok, warning, failed };
const char* to_string(Status s);

struct TaskResult {
  std::string name;
  Status status = Status::ok;
  json diagnostics = json::object();
};

struct RunReport {
  std::string model;
  std::string provenance;
  std::vector<TaskResult> tasks;
  std::vector<std::string> files;
  double wall_seconds = 0.0;

  bool failed() const;
  /// Everything except the wall-clock time, so identical runs give identical files.
  json to_json(const Scenario& s) const;
};

/// Runs every task, writes the output files and report.json.
RunReport run(const Scenario& scenario, std::ostream* log = nullptr);

}  // namespace smq::cli
