#include "smq/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "smq/classical.hpp"
#include "smq/models.hpp"
#include "smq/semimarkov.hpp"
#include "smq/trajectories.hpp"

namespace smq::cli {

namespace {

const std::vector<std::string> kTasks = {"validate",     "propagate",  "kernel",   "classical-compare",
                                         "trajectories", "povm-check", "probe-scan"};
const std::vector<std::string> kModels = {"pauli", "weyl", "gellmann", "collision", "markov", "classical", "probe"};

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ParseError(path.empty() ? msg : path + ": " + msg);
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string join(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) fail(path, "must be positive");
  return v;
}

std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], join(path, i)));
  return out;
}

complex entry(const json& j, const std::string& path) {
  if (j.is_number()) return {number(j, path), 0.0};
  if (j.is_array() && j.size() == 2) return {number(j[0], join(path, 0)), number(j[1], join(path, 1))};
  fail(path, "expected a number or a [re, im] pair");
}

Mat matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a square matrix (array of rows)");
  const auto n = static_cast<Eigen::Index>(j.size());
  Mat m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    const auto rp = join(path, static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) fail(rp, "row length differs from row count");
    for (Eigen::Index c = 0; c < n; ++c)
      m(r, c) = entry(row[static_cast<std::size_t>(c)], join(rp, static_cast<std::size_t>(c)));
  }
  return m;
}

std::vector<Mat> matrices(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of matrices");
  std::vector<Mat> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(matrix(j[i], join(path, i)));
  return out;
}

WaitingDensity density(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("kind")) fail(path, "expected an object with a \"kind\"");
  const auto& kind = j["kind"];
  if (!kind.is_string()) fail(join(path, "kind"), "expected a string");
  const auto k = kind.get<std::string>();
  try {
    if (k == "exponential") {
      check_keys(j, path, {"kind", "rate"});
      if (!j.contains("rate")) fail(path, "missing \"rate\"");
      return WaitingDensity::exponential(positive(j["rate"], join(path, "rate")));
    }
    if (k == "mixture") {
      check_keys(j, path, {"kind", "components"});
      const auto& c = j.contains("components") ? j["components"] : json();
      if (!c.is_array() || c.empty()) fail(join(path, "components"), "expected [[weight, rate], ...]");
      std::vector<WaitingDensity::Component> comps;
      for (std::size_t i = 0; i < c.size(); ++i) {
        const auto v = numbers(c[i], join(join(path, "components"), i));
        if (v.size() != 2) fail(join(join(path, "components"), i), "expected [weight, rate]");
        comps.push_back({v[0], v[1]});
      }
      return WaitingDensity::mixture(std::move(comps));
    }
    if (k == "erlang") {
      check_keys(j, path, {"kind", "shape", "rate"});
      if (!j.contains("shape") || !j["shape"].is_number_integer()) fail(join(path, "shape"), "expected an integer");
      if (!j.contains("rate")) fail(path, "missing \"rate\"");
      return WaitingDensity::erlang(j["shape"].get<int>(), positive(j["rate"], join(path, "rate")));
    }
    if (k == "tabulated") {
      check_keys(j, path, {"kind", "dt", "values"});
      if (!j.contains("dt") || !j.contains("values")) fail(path, "needs \"dt\" and \"values\"");
      auto v = numbers(j["values"], join(path, "values"));
      if (v.size() < 3) fail(join(path, "values"), "need at least 3 samples");
      const TimeGrid g(positive(j["dt"], join(path, "dt")), static_cast<int>(v.size()) - 1);
      return WaitingDensity::tabulated(g, std::move(v));
    }
  } catch (const InvalidArgument& e) {
    fail(path, e.what());
  }
  fail(join(path, "kind"), "unknown density kind \"" + k + "\"");
}

std::vector<WaitingDensity> densities(const json& j, const std::string& path, std::size_t n) {
  if (!j.is_array() || j.size() != n) fail(path, "expected " + std::to_string(n) + " densities");
  std::vector<WaitingDensity> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(density(j[i], join(path, i)));
  return out;
}

// Structural validation of the model section; objects are built in run().
void check_model(const json& m) {
  const std::string path = "model";
  if (!m.is_object() || !m.contains("name") || !m["name"].is_string()) fail(path, "needs a string \"name\"");
  const auto name = m["name"].get<std::string>();
  if (std::find(kModels.begin(), kModels.end(), name) == kModels.end()) fail(join(path, "name"), "unknown model \"" + name + "\"");
  if (name == "pauli" || name == "gellmann") {
    check_keys(m, path, {"name", "p", "densities"});
    const std::size_t n = name == "pauli" ? 4 : 9;
    if (m.contains("p") != m.contains("densities")) fail(path, "give both \"p\" and \"densities\" or neither");
    if (m.contains("p") && numbers(m["p"], join(path, "p")).size() != n) fail(join(path, "p"), "expected " + std::to_string(n) + " weights");
    if (m.contains("densities")) densities(m["densities"], join(path, "densities"), n);
  } else if (name == "weyl") {
    check_keys(m, path, {"name", "d", "p", "densities"});
    int d = 3;
    if (m.contains("d")) {
      if (!m["d"].is_number_integer() || m["d"].get<int>() < 2 || m["d"].get<int>() > 8) fail(join(path, "d"), "expected an integer in [2, 8]");
      d = m["d"].get<int>();
    }
    if (m.contains("p") != m.contains("densities")) fail(path, "give both \"p\" and \"densities\" or neither");
    if (!m.contains("p") && d != 3) fail(path, "default parameters exist for d = 3 only");
    const auto n = static_cast<std::size_t>(d * d);
    if (m.contains("p") && numbers(m["p"], join(path, "p")).size() != n) fail(join(path, "p"), "expected d^2 weights");
    if (m.contains("densities")) densities(m["densities"], join(path, "densities"), n);
  } else if (name == "collision") {
    check_keys(m, path, {"name", "density", "gauge", "channel"});
    if (m.contains("density")) density(m["density"], join(path, "density"));
    if (m.contains("gauge")) {
      const auto& g = m["gauge"];
      check_keys(g, join(path, "gauge"), {"hamiltonian", "noise", "rates"});
      if (g.contains("hamiltonian")) matrix(g["hamiltonian"], join(path, "gauge.hamiltonian"));
      if (g.contains("noise") != g.contains("rates")) fail(join(path, "gauge"), "give both \"noise\" and \"rates\" or neither");
      if (g.contains("noise") && matrices(g["noise"], join(path, "gauge.noise")).size() != numbers(g["rates"], join(path, "gauge.rates")).size()) {
        fail(join(path, "gauge"), "\"noise\" and \"rates\" differ in length");
      }
    }
    if (m.contains("channel")) {
      check_keys(m["channel"], join(path, "channel"), {"kraus"});
      if (!m["channel"].contains("kraus")) fail(join(path, "channel"), "missing \"kraus\"");
      matrices(m["channel"]["kraus"], join(path, "channel.kraus"));
    }
  } else if (name == "markov") {
    check_keys(m, path, {"name", "gamma", "channel", "hamiltonian"});
    if (m.contains("gamma") != m.contains("channel")) fail(path, "give both \"gamma\" and \"channel\" or neither");
    if (m.contains("gamma")) matrix(m["gamma"], join(path, "gamma"));
    if (m.contains("channel")) {
      check_keys(m["channel"], join(path, "channel"), {"kraus"});
      if (!m["channel"].contains("kraus")) fail(join(path, "channel"), "missing \"kraus\"");
      matrices(m["channel"]["kraus"], join(path, "channel.kraus"));
    }
    if (m.contains("hamiltonian")) matrix(m["hamiltonian"], join(path, "hamiltonian"));
  } else if (name == "classical") {
    check_keys(m, path, {"name", "pi", "rates", "densities"});
    if (m.contains("rates") && m.contains("densities")) fail(path, "give \"rates\" or \"densities\", not both");
    if (m.contains("pi")) {
      const auto& pi = m["pi"];
      if (!pi.is_array() || pi.empty()) fail(join(path, "pi"), "expected a square matrix");
      for (std::size_t i = 0; i < pi.size(); ++i)
        if (numbers(pi[i], join(join(path, "pi"), i)).size() != pi.size()) fail(join(path, "pi"), "expected a square matrix");
      if (m.contains("rates") && numbers(m["rates"], join(path, "rates")).size() != pi.size()) fail(join(path, "rates"), "one rate per state");
      if (m.contains("densities")) densities(m["densities"], join(path, "densities"), pi.size());
    } else if (m.contains("rates") || m.contains("densities")) {
      fail(path, "\"rates\"/\"densities\" need \"pi\"");
    }
  } else {
    check_keys(m, path, {"name", "kind", "memory_shape", "memory_rates", "damping_rates", "omega"});
    if (m.contains("kind")) {
      if (!m["kind"].is_string() || (m["kind"] != "lidar_shabani" && m["kind"] != "barnett_stenholm")) {
        fail(join(path, "kind"), "expected \"lidar_shabani\" or \"barnett_stenholm\"");
      }
    }
    if (m.contains("memory_shape") && (!m["memory_shape"].is_number_integer() || m["memory_shape"].get<int>() < 1)) {
      fail(join(path, "memory_shape"), "expected a positive integer");
    }
    for (const char* key : {"memory_rates", "damping_rates"}) {
      if (m.contains(key)) {
        const auto v = numbers(m[key], join(path, key));
        if (v.empty()) fail(join(path, key), "must not be empty");
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (std::string(key) == "memory_rates" ? !(v[i] > 0.0) : !(v[i] >= 0.0)) fail(join(join(path, key), i), "out of range");
        }
      }
    }
    if (m.contains("omega")) number(m["omega"], join(path, "omega"));
  }
}

std::string position(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

Scenario parse_scenario(const std::string& text, const Overrides& overrides) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::string msg = e.what();
    if (const auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
    throw ParseError(position(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + msg);
  }
  check_keys(root, "", {"model", "grid", "tasks", "output", "seed", "tolerances", "propagate", "kernel", "trajectories", "povm"});
  Scenario s;
  if (!root.contains("model")) fail("", "missing \"model\"");
  check_model(root["model"]);
  s.model = root["model"];
  s.model_name = s.model["name"].get<std::string>();

  if (root.contains("grid")) {
    const auto& g = root["grid"];
    check_keys(g, "grid", {"dt", "horizon"});
    if (g.contains("dt")) s.dt = positive(g["dt"], "grid.dt");
    if (g.contains("horizon")) s.horizon = positive(g["horizon"], "grid.horizon");
  }
  if (!root.contains("tasks") || !root["tasks"].is_array() || root["tasks"].empty()) fail("tasks", "expected a non-empty array");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < root["tasks"].size(); ++i) {
    const auto& t = root["tasks"][i];
    const auto p = join("tasks", i);
    if (!t.is_string()) fail(p, "expected a task name");
    const auto name = t.get<std::string>();
    if (std::find(kTasks.begin(), kTasks.end(), name) == kTasks.end()) fail(p, "unknown task \"" + name + "\"");
    if (!seen.insert(name).second) fail(p, "task \"" + name + "\" listed twice");
    const bool probe = s.model_name == "probe";
    if (name == "probe-scan" && !probe) fail(p, "probe-scan needs the probe model");
    if (probe && name != "probe-scan") fail(p, "the probe model supports only probe-scan");
    if (name == "classical-compare" && s.model_name != "classical") fail(p, "classical-compare needs the classical model");
    s.tasks.push_back(name);
  }
  if (root.contains("output")) {
    if (!root["output"].is_string() || root["output"].get<std::string>().empty()) fail("output", "expected a directory name");
    s.output = root["output"].get<std::string>();
  }
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) fail("seed", "expected a nonnegative integer");
    s.seed = root["seed"].get<std::uint64_t>();
  }
  if (root.contains("tolerances")) {
    const auto& t = root["tolerances"];
    check_keys(t, "tolerances", {"cp", "trace", "residual_factor"});
    if (t.contains("cp")) s.tol.cp = positive(t["cp"], "tolerances.cp");
    if (t.contains("trace")) s.tol.trace = positive(t["trace"], "tolerances.trace");
    if (t.contains("residual_factor")) s.tol.residual_factor = positive(t["residual_factor"], "tolerances.residual_factor");
  }
  if (root.contains("propagate")) {
    s.propagate = root["propagate"];
    check_keys(s.propagate, "propagate", {"order", "compare"});
    if (s.propagate.contains("order") && s.propagate["order"] != "left" && s.propagate["order"] != "right") {
      fail("propagate.order", "expected \"left\" or \"right\"");
    }
    if (s.propagate.contains("compare") && !s.propagate["compare"].is_boolean()) fail("propagate.compare", "expected true or false");
  }
  if (root.contains("kernel")) {
    s.kernel = root["kernel"];
    check_keys(s.kernel, "kernel", {"s"});
    if (s.kernel.contains("s")) {
      for (double v : numbers(s.kernel["s"], "kernel.s"))
        if (!(v > 0.0)) fail("kernel.s", "Laplace points must be positive");
    }
  }
  if (root.contains("trajectories")) {
    s.trajectories = root["trajectories"];
    check_keys(s.trajectories, "trajectories", {"samples", "initial_state", "events"});
    if (s.trajectories.contains("samples") && (!s.trajectories["samples"].is_number_unsigned() || s.trajectories["samples"].get<std::size_t>() < 1)) {
      fail("trajectories.samples", "expected a positive integer");
    }
    if (s.trajectories.contains("events") && !s.trajectories["events"].is_number_unsigned()) fail("trajectories.events", "expected a nonnegative integer");
    if (s.trajectories.contains("initial_state")) matrix(s.trajectories["initial_state"], "trajectories.initial_state");
  }
  if (root.contains("povm")) {
    s.povm = root["povm"];
    check_keys(s.povm, "povm", {"time", "n_max"});
    if (s.povm.contains("time")) number(s.povm["time"], "povm.time");
    if (s.povm.contains("n_max") && (!s.povm["n_max"].is_number_unsigned() || s.povm["n_max"].get<int>() > 64)) {
      fail("povm.n_max", "expected an integer in [0, 64]");
    }
  }
  if (overrides.seed) s.seed = *overrides.seed;
  if (overrides.out) s.output = *overrides.out;
  if (overrides.dt) {
    if (!(*overrides.dt > 0.0)) fail("--dt", "must be positive");
    s.dt = *overrides.dt;
  }
  if (overrides.horizon) {
    if (!(*overrides.horizon > 0.0)) fail("--horizon", "must be positive");
    s.horizon = *overrides.horizon;
  }
  if (s.horizon / s.dt < 3.0) fail("grid", "horizon must span at least 3 steps");
  if (s.horizon / s.dt > 1e5) fail("grid", "more than 1e5 steps");
  return s;
}

Scenario load_scenario(const std::filesystem::path& file, const Overrides& overrides) {
  std::ifstream in(file);
  if (!in) throw ParseError("cannot read scenario file " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario(buf.str(), overrides);
  } catch (const ParseError& e) {
    throw ParseError(file.string() + ": " + e.what());
  }
}

const char* to_string(Status s) {
  switch (s) {
    case Status::ok: return "ok";
    case Status::warning: return "warning";
    case Status::failed: return "failed";
  }
  return "failed";
}

bool RunReport::failed() const {
  return std::any_of(tasks.begin(), tasks.end(), [](const TaskResult& t) { return t.status == Status::failed; });
}

json RunReport::to_json(const Scenario& s) const {
  json j;
  j["model"] = s.model;
  j["provenance"] = provenance;
  j["grid"] = {{"dt", s.grid().dt}, {"steps", s.grid().steps}, {"horizon", s.grid().horizon()}};
  j["seed"] = s.seed;
  j["tasks"] = json::array();
  for (const auto& t : tasks) j["tasks"].push_back({{"name", t.name}, {"status", to_string(t.status)}, {"diagnostics", t.diagnostics}});
  j["files"] = files;
  j["status"] = failed() ? "failed" : "ok";
  return j;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
 public:
  Csv(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw Error("cannot write " + path.string());
  }
  Csv& operator<<(const std::string& s) {
    sep();
    out_ << s;
    return *this;
  }
  Csv& operator<<(double v) { return *this << fmt(v); }
  Csv& operator<<(const complex& v) { return *this << v.real() << v.imag(); }
  void row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ofstream out_;
  bool first_ = true;
};

void entry_header(Csv& csv, Eigen::Index rows, Eigen::Index cols) {
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto rc = std::to_string(r) + "_" + std::to_string(c);
      csv << "re_" + rc << "im_" + rc;
    }
}

void entries(Csv& csv, const Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) csv << m(r, c);
}

// Distinguishes discretization-scale excess (warning) from real violations.
Status grade(double excess, double tol, double dt) {
  if (excess <= tol) return Status::ok;
  if (excess <= tol + 10.0 * dt * dt) return Status::warning;
  return Status::failed;
}

Status worst(Status a, Status b) { return static_cast<int>(a) > static_cast<int>(b) ? a : b; }

json diagnostics_json(const BuildDiagnostics& d) {
  json w = json::array();
  for (const auto& s : d.warnings) w.push_back(s);
  return {{"series_terms", d.terms},
          {"last_term_magnitude", d.last_term_magnitude},
          {"converged", d.converged},
          {"min_choi", d.min_choi},
          {"max_trace_defect", d.max_trace_defect},
          {"integrated_q_excess", d.integrated_q_excess},
          {"warnings", w}};
}

Superoperator channel(const json& c) { return superop_from_kraus(matrices(c["kraus"], "model.channel.kraus")); }

struct Model {
  std::optional<LegitimatePair> pair;
  std::optional<Superoperator> generator;  // exact Markov generator
  std::optional<SemiMarkovMatrix> classical;
  std::optional<RMat> classical_generator;
};

Model build_model(const Scenario& s) {
  const auto& m = s.model;
  const auto grid = s.grid();
  Model out;
  const auto& name = s.model_name;
  if (name == "pauli" || name == "weyl" || name == "gellmann") {
    models::MixtureParams p;
    int d = name == "pauli" ? 2 : 3;
    if (name == "weyl" && m.contains("d")) d = m["d"].get<int>();
    if (m.contains("p")) {
      p.p = numbers(m["p"], "model.p");
      p.f = densities(m["densities"], "model.densities", p.p.size());
    } else {
      p = name == "pauli" ? models::default_pauli() : name == "weyl" ? models::default_weyl3() : models::default_gellmann();
    }
    const auto q = name == "pauli"  ? models::pauli_semimarkov(p.p, p.f, grid)
                   : name == "weyl" ? models::weyl_semimarkov(d, p.p, p.f, grid)
                                    : models::gellmann_semimarkov(p.p, p.f, grid);
    out.pair = canonical_pair(q);
    if (name == "gellmann") out.pair->detail = "beyond collision model";
  } else if (name == "collision") {
    const auto f = m.contains("density") ? density(m["density"], "model.density") : models::default_collision_density();
    Superoperator lg = models::default_collision_gauge_generator();
    if (m.contains("gauge")) {
      const auto& g = m["gauge"];
      models::GKSLGenerator gen{g.contains("hamiltonian") ? matrix(g["hamiltonian"], "model.gauge.hamiltonian") : Mat::Zero(2, 2), {}, {}};
      if (g.contains("noise")) {
        gen.ops = matrices(g["noise"], "model.gauge.noise");
        gen.rates = numbers(g["rates"], "model.gauge.rates");
      }
      lg = models::gksl_superoperator(gen);
    }
    const Superoperator ch = m.contains("channel") ? channel(m["channel"]) : models::default_collision_channel();
    if (ch.dim() != lg.dim()) fail("model", "gauge and channel dimensions differ");
    const auto gf = SuperoperatorFamily::generate(grid, [&](double t) { return expm(lg * t); });
    out.pair = collision_pair(f, gf, SuperoperatorFamily::constant(grid, ch));
  } else if (name == "markov") {
    auto p = models::default_markov();
    if (m.contains("gamma")) p = {channel(m["channel"]), matrix(m["gamma"], "model.gamma")};
    const auto mk = m.contains("hamiltonian")
                        ? hamiltonian_markov_pair(p.phi, p.gamma, matrix(m["hamiltonian"], "model.hamiltonian"), grid)
                        : markov_pair(p.phi, p.gamma, grid);
    out.pair = mk.pair;
    out.generator = mk.generator;
  } else if (name == "classical") {
    RMat pi(2, 2);
    pi << 0.0, 1.0, 1.0, 0.0;
    if (m.contains("pi")) {
      const auto& pj = m["pi"];
      pi.resize(static_cast<Eigen::Index>(pj.size()), static_cast<Eigen::Index>(pj.size()));
      for (std::size_t i = 0; i < pj.size(); ++i) {
        const auto row = numbers(pj[i], "model.pi");
        for (std::size_t j = 0; j < row.size(); ++j) pi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
      }
    }
    if (m.contains("densities")) {
      const auto f = densities(m["densities"], "model.densities", static_cast<std::size_t>(pi.rows()));
      if (pi.minCoeff() < 0.0 || ((pi.colwise().sum().array() - 1.0).abs() > 1e-12).any()) fail("model.pi", "must be column stochastic");
      std::vector<RMat> q;
      for (int k = 0; k <= grid.steps; ++k) {
        RVec fk(pi.rows());
        for (Eigen::Index j = 0; j < pi.rows(); ++j) fk(j) = f[static_cast<std::size_t>(j)].density(grid.time(k));
        q.push_back(pi * fk.asDiagonal());
      }
      out.classical = SemiMarkovMatrix::validate(grid, std::move(q));
    } else {
      ClassicalMarkovModel cm{pi, m.contains("rates") ? RVec(Eigen::Map<const RVec>(numbers(m["rates"], "model.rates").data(), pi.rows()))
                                                      : RVec(RVec::Ones(pi.rows()))};
      out.classical = cm.semi_markov(grid);
      out.classical_generator = cm.generator();
    }
    out.pair = canonical_pair(embed_commutative(*out.classical));
  }
  return out;
}

struct Context {
  const Scenario& s;
  const Model& model;
  RunReport& report;
  std::optional<BuiltMap> built;

  std::filesystem::path file(const std::string& name) {
    report.files.push_back(name);
    return s.output / name;
  }
  const BuiltMap& lambda() {
    if (!built) {
      BuildOptions opt;
      if (s.propagate.value("order", "left") == "right") opt.order = Order::right;
      built = build_map(model.pair->n, model.pair->q.q, opt);
    }
    return *built;
  }
};

TaskResult task_validate(Context& c) {
  const auto& p = *c.model.pair;
  const double dt = p.grid().dt;
  TaskResult r{"validate", Status::ok, {}};
  const auto g = survival_operator(waiting_time_operator(p.q), 1e-10 + 10.0 * dt * dt);
  double g_min = std::numeric_limits<double>::infinity();
  bool scalar = true;
  for (const auto& gk : g.values()) {
    g_min = std::min(g_min, min_eigenvalue(gk));
    if (max_abs(gk - gk.trace() / static_cast<double>(gk.rows()) * Mat::Identity(gk.rows(), gk.cols())) > 1e-12) scalar = false;
  }
  const auto rec = recognize_generalized_semi_markov(p);
  r.diagnostics = {{"provenance", to_string(p.provenance)},
                   {"detail", p.detail},
                   {"dimension", p.dim()},
                   {"q_min_choi", p.q.min_choi},
                   {"q_integrated_excess", p.q.integrated_excess},
                   {"normalization_residual", p.normalization_residual},
                   {"normalization_bound", 10.0 * dt * dt},
                   {"survival_min_eigenvalue", g_min},
                   {"survival_scalar", scalar},
                   {"generalized_semi_markov", rec.generalized},
                   {"gauge_min_choi", rec.min_choi},
                   {"gauge_max_trace_defect", rec.max_trace_defect}};
  r.status = grade(-p.q.min_choi, c.s.tol.cp, dt);
  if (!rec.generalized) r.status = worst(r.status, Status::warning);
  return r;
}

TaskResult task_propagate(Context& c) {
  const auto& b = c.lambda();
  const auto& grid = b.lambda.grid();
  TaskResult r{"propagate", Status::ok, diagnostics_json(b.diagnostics)};
  r.diagnostics["order"] = c.s.propagate.value("order", "left");
  r.status = worst(grade(-b.diagnostics.min_choi, c.s.tol.cp, grid.dt), grade(b.diagnostics.max_trace_defect, c.s.tol.trace, grid.dt));
  if (!b.diagnostics.warnings.empty()) r.status = worst(r.status, Status::warning);
  if (c.s.propagate.value("compare", true) && c.model.generator) {
    double dev = 0.0;
    for (int k = 0; k <= grid.steps; ++k) {
      dev = std::max(dev, max_abs(b.lambda[static_cast<std::size_t>(k)].matrix() - expm(*c.model.generator * grid.time(k)).matrix()));
    }
    r.diagnostics["exponential_oracle_deviation"] = dev;
    r.diagnostics["exponential_oracle_bound"] = 5.0 * grid.dt * grid.dt;
    if (dev > 5.0 * grid.dt * grid.dt) r.status = Status::failed;
  }
  Csv csv(c.file("lambda.csv"));
  csv << "t";
  const auto n = static_cast<Eigen::Index>(c.model.pair->dim()) * c.model.pair->dim();
  entry_header(csv, n, n);
  csv.row();
  for (int k = 0; k <= grid.steps; ++k) {
    csv << grid.time(k);
    entries(csv, b.lambda[static_cast<std::size_t>(k)].matrix());
    csv.row();
  }
  return r;
}

TaskResult task_kernel(Context& c) {
  const auto& p = *c.model.pair;
  const auto& grid = p.grid();
  const double bound = c.s.tol.residual_factor * grid.dt * grid.dt;
  const auto& b = c.lambda();
  const Order order = c.s.propagate.value("order", "left") == "right" ? Order::right : Order::left;
  const auto k = pair_kernel(p, order);
  const auto lk = propagate_with_kernel(k, grid, order);
  const auto res = verify_master_equation(b.lambda, k, order);
  TaskResult r{"kernel", Status::ok, {}};
  double annihilation = max_abs(dual_identity(*k.singular).matrix());
  for (const auto& v : k.regular.values()) annihilation = std::max(annihilation, max_abs(dual_identity(v)));
  r.diagnostics = {{"order", order == Order::left ? "left" : "right"},
                   {"propagation_deviation", max_deviation(lk, b.lambda)},
                   {"propagation_bound", bound},
                   {"residual", res.max_residual},
                   {"residual_scale", res.scale},
                   {"residual_bound", bound * res.scale},
                   {"trace_annihilation", annihilation}};
  if (max_deviation(lk, b.lambda) > bound || !res.within(c.s.tol.residual_factor)) r.status = Status::failed;
  if (p.provenance == Provenance::canonical || p.provenance == Provenance::markov) {
    const auto g = survival_operator(waiting_time_operator(p.q), 1e-10 + 10.0 * grid.dt * grid.dt);
    const auto w = rate_map_W(p.q, g);
    const auto kw = kernel_from_rate_map(w);
    r.diagnostics["rate_map_kernel_deviation"] = max_deviation(propagate_with_kernel(kw, grid), b.lambda);
    r.diagnostics["rate_map_regular_min_choi"] = w.min_choi_regular;
  }
  json laplace = json::array();
  for (double s : c.s.kernel.contains("s") ? numbers(c.s.kernel["s"], "kernel.s") : std::vector<double>{0.5, 1.0, 2.0}) {
    const auto kl = kernel_laplace(p, s, Order::left);
    const auto kr = kernel_laplace(p, s, Order::right);
    laplace.push_back({{"s", s}, {"left_right_gap", max_abs(kl.value.matrix() - kr.value.matrix())}, {"condition", kl.condition}});
  }
  r.diagnostics["laplace"] = laplace;
  r.diagnostics["singular_part"] = json::array();
  Csv csv(c.file("kernel.csv"));
  csv << "t";
  const auto n = static_cast<Eigen::Index>(p.dim()) * p.dim();
  entry_header(csv, n, n);
  csv.row();
  for (int i = 0; i <= grid.steps; ++i) {
    csv << grid.time(i);
    entries(csv, k.regular[static_cast<std::size_t>(i)].matrix());
    csv.row();
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < n; ++j) row.push_back({k.singular->matrix()(i, j).real(), k.singular->matrix()(i, j).imag()});
    r.diagnostics["singular_part"].push_back(row);
  }
  return r;
}

TaskResult task_classical(Context& c) {
  const auto& q = *c.model.classical;
  const auto& grid = q.grid;
  const auto t = stochastic_propagator(q);
  const auto quantum = extract_diagonal(c.lambda().lambda);
  double gap = 0.0;
  for (std::size_t k = 0; k < t.t.size(); ++k) gap = std::max(gap, (t.t[k] - quantum.t[k]).cwiseAbs().maxCoeff());
  const auto res = verify_classical_master_equation(t, q);
  TaskResult r{"classical-compare", Status::ok, {}};
  r.diagnostics = {{"quantum_classical_gap", gap},
                   {"gap_bound", 1e-8},
                   {"column_defect", t.max_column_defect},
                   {"min_entry", t.min_entry},
                   {"off_diagonal_leak", quantum.off_diagonal_leak},
                   {"master_equation_residual", res.max_residual},
                   {"residual_scale", res.scale}};
  if (gap > 1e-8 || t.max_column_defect > 10.0 * grid.dt * grid.dt) r.status = Status::failed;
  if (c.model.classical_generator) {
    double dev = 0.0;
    for (int k = 0; k <= grid.steps; ++k) {
      const RMat e = expm(Mat((*c.model.classical_generator * grid.time(k)).cast<complex>())).real();
      dev = std::max(dev, (t.t[static_cast<std::size_t>(k)] - e).cwiseAbs().maxCoeff());
    }
    r.diagnostics["exponential_oracle_deviation"] = dev;
    if (dev > 5.0 * grid.dt * grid.dt) r.status = Status::failed;
  }
  Csv csv(c.file("classical.csv"));
  csv << "t";
  const auto n = static_cast<Eigen::Index>(q.states());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) csv << "classical_" + std::to_string(i) + "_" + std::to_string(j);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) csv << "quantum_" + std::to_string(i) + "_" + std::to_string(j);
  csv.row();
  for (std::size_t k = 0; k < t.t.size(); ++k) {
    csv << grid.time(static_cast<int>(k));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) csv << t.t[k](i, j);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) csv << quantum.t[k](i, j);
    csv.row();
  }
  return r;
}

Mat initial_state(const Context& c) {
  const int d = c.model.pair->dim();
  if (c.s.trajectories.contains("initial_state")) {
    Mat rho = matrix(c.s.trajectories["initial_state"], "trajectories.initial_state");
    if (rho.rows() != d) fail("trajectories.initial_state", "dimension differs from the model");
    return rho;
  }
  const Vec psi = Vec::Ones(d) / std::sqrt(static_cast<double>(d));
  return psi * psi.adjoint();
}

TaskResult task_trajectories(Context& c) {
  const auto& p = *c.model.pair;
  const auto& grid = p.grid();
  const auto samples = c.s.trajectories.value("samples", std::size_t{10000});
  const auto events = c.s.trajectories.value("events", std::size_t{10});
  const Mat rho0 = initial_state(c);
  const auto e = ensemble_average(p, rho0, samples, c.s.seed);
  const auto& lam = c.lambda().lambda;
  double worst_z = 0.0, worst_dev = 0.0;
  Csv csv(c.file("ensemble.csv"));
  csv << "t";
  entry_header(csv, p.dim(), p.dim());
  for (int i = 0; i < p.dim(); ++i)
    for (int j = 0; j < p.dim(); ++j) {
      const auto rc = std::to_string(i) + "_" + std::to_string(j);
      csv << "se_re_" + rc << "se_im_" + rc;
    }
  entry_header(csv, p.dim(), p.dim());
  csv.row();
  for (std::size_t k = 0; k < e.mean.size(); ++k) {
    const Mat exact = lam[k].apply(rho0);
    const Mat diff = e.mean[k] - exact;
    for (int i = 0; i < p.dim(); ++i)
      for (int j = 0; j < p.dim(); ++j) {
        const double zr = std::abs(diff(i, j).real()) / std::max(e.stderr_re[k](i, j), 1e-12);
        const double zi = std::abs(diff(i, j).imag()) / std::max(e.stderr_im[k](i, j), 1e-12);
        worst_z = std::max({worst_z, zr, zi});
      }
    worst_dev = std::max(worst_dev, max_abs(diff));
    csv << grid.time(static_cast<int>(k));
    entries(csv, e.mean[k]);
    for (int i = 0; i < p.dim(); ++i)
      for (int j = 0; j < p.dim(); ++j) csv << e.stderr_re[k](i, j) << e.stderr_im[k](i, j);
    entries(csv, exact);
    csv.row();
  }
  TaskResult r{"trajectories", Status::ok, {}};
  r.diagnostics = {{"samples", e.samples},
                   {"mean_jumps", e.mean_jumps},
                   {"max_deviation", worst_dev},
                   {"max_standard_errors", worst_z},
                   {"clipped_densities", e.clipped},
                   {"jump_histogram", e.jump_histogram}};
  if (worst_z > 4.0) r.status = Status::warning;
  if (events > 0) {
    Csv ev(c.file("events.csv"));
    ev << "trajectory" << "jump" << "time";
    entry_header(ev, p.dim(), p.dim());
    ev.row();
    for (std::size_t id = 0; id < events; ++id) {
      const auto tr = sample_trajectory(p, rho0, grid.horizon(), trajectory_seed(c.s.seed, id));
      for (int j = 0; j < tr.jump_count(); ++j) {
        ev << std::to_string(id) << std::to_string(j + 1) << tr.jump_times[static_cast<std::size_t>(j)];
        entries(ev, tr.states[static_cast<std::size_t>(j)]);
        ev.row();
      }
    }
  }
  return r;
}

TaskResult task_povm(Context& c) {
  const auto& p = *c.model.pair;
  const auto& grid = p.grid();
  const double t = c.s.povm.contains("time") ? number(c.s.povm["time"], "povm.time") : std::min(1.0, grid.horizon());
  const int n_max = c.s.povm.value("n_max", 3);
  if (t < 0.0 || t > grid.horizon() + 1e-12) fail("povm.time", "outside the grid");
  const double tn = grid.time(grid.nearest(t));
  const auto g = survival_operator(waiting_time_operator(p.q), 1e-10 + 10.0 * grid.dt * grid.dt);
  const auto chk = check_povm_normalization(p.q, g, tn, n_max);
  TaskResult r{"povm-check", Status::ok, {}};
  json orders = json::array();
  for (const auto& o : chk.orders) orders.push_back(o.trace().real() / static_cast<double>(o.rows()));
  r.diagnostics = {{"time", tn},
                   {"n_max", n_max},
                   {"defect", chk.defect},
                   {"tail_bound", chk.tail_bound},
                   {"quadrature_bound", 10.0 * grid.dt * grid.dt},
                   {"order_mass", orders}};
  if (chk.defect > chk.tail_bound + 10.0 * grid.dt * grid.dt) r.status = Status::failed;
  return r;
}

TaskResult task_probe(Context& c) {
  const auto& m = c.s.model;
  const auto kind = m.value("kind", "lidar_shabani") == "lidar_shabani" ? models::ProbeKind::lidar_shabani
                                                                        : models::ProbeKind::barnett_stenholm;
  const int shape = m.value("memory_shape", 2);
  const auto mem = m.contains("memory_rates") ? numbers(m["memory_rates"], "model.memory_rates") : std::vector<double>{0.3, 0.6, 1.0, 2.0};
  const auto damp = m.contains("damping_rates") ? numbers(m["damping_rates"], "model.damping_rates") : std::vector<double>{0.1, 0.3, 1.0};
  const double omega = m.value("omega", kind == models::ProbeKind::lidar_shabani ? 2.0 : 0.0);
  const auto pts = models::probe_scan(kind, shape, mem, damp, omega, c.s.grid());
  Csv csv(c.file("cp_scan.csv"));
  csv << "gamma" << "rate" << "min_choi" << "time_of_min";
  csv.row();
  double lowest = std::numeric_limits<double>::infinity();
  json at;
  for (const auto& p : pts) {
    csv << p.memory_rate << p.damping_rate << p.min_choi << p.time_of_min;
    csv.row();
    if (p.min_choi < lowest) {
      lowest = p.min_choi;
      at = {{"memory_rate", p.memory_rate}, {"damping_rate", p.damping_rate}, {"time", p.time_of_min}};
    }
  }
  std::size_t violations = 0;
  for (const auto& p : pts) violations += p.min_choi < -1e-6;
  TaskResult r{"probe-scan", Status::ok, {}};
  r.diagnostics = {{"kind", models::to_string(kind)}, {"memory_shape", shape}, {"omega", omega},
                   {"points", pts.size()}, {"cp_violations", violations}, {"min_choi", lowest}, {"argmin", at}};
  return r;
}

}  // namespace

RunReport run(const Scenario& s, std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.model = s.model_name;
  std::filesystem::create_directories(s.output);
  Model model;
  std::optional<TaskResult> construction_failure;
  try {
    if (s.model_name != "probe") model = build_model(s);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("model: ") + e.what());
  } catch (const ValidationError& e) {
    construction_failure = TaskResult{"construct", Status::failed, {{"error", e.what()}}};
  }
  if (model.pair) report.provenance = to_string(model.pair->provenance);
  if (construction_failure) {
    report.tasks.push_back(*construction_failure);
  } else {
    Context ctx{s, model, report, std::nullopt};
    for (const auto& name : s.tasks) {
      if (log) *log << "running " << name << "\n";
      TaskResult r;
      try {
        if (name == "validate") r = task_validate(ctx);
        else if (name == "propagate") r = task_propagate(ctx);
        else if (name == "kernel") r = task_kernel(ctx);
        else if (name == "classical-compare") r = task_classical(ctx);
        else if (name == "trajectories") r = task_trajectories(ctx);
        else if (name == "povm-check") r = task_povm(ctx);
        else r = task_probe(ctx);
      } catch (const ParseError&) {
        throw;
      } catch (const Error& e) {
        r = TaskResult{name, Status::failed, {{"error", e.what()}}};
      }
      report.tasks.push_back(std::move(r));
    }
  }
  report.files.push_back("report.json");
  std::ofstream(s.output / "report.json") << report.to_json(s).dump(2) << "\n";
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace smq::cli
