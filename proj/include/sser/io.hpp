#pragma once

// File formats: catalog JSON, trace / state / power / epoch / residual CSV,
// diagnostics and report JSON, and the run configuration.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sser/epochs.hpp"
#include "sser/metrics.hpp"
#include "sser/model.hpp"
#include "sser/ploa.hpp"
#include "sser/simgen.hpp"
#include "sser/solver.hpp"

namespace sser {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Text helpers

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? comma : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  return out;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Catalog

inline json catalog_to_json(const ApplianceCatalog& catalog) {
  json apps = json::array();
  for (const Appliance& a : catalog.appliances()) {
    json modes = json::array();
    for (const ModeSpec& m : a.modes) {
      modes.push_back({{"rated_w", m.rated_w}, {"deviation_w", m.deviation_w}});
    }
    apps.push_back({{"name", a.name}, {"standby_w", a.standby_w}, {"modes", modes}});
  }
  return {{"appliances", apps}};
}

inline ApplianceCatalog catalog_from_json(const json& j) {
  if (!j.is_object() || !j.contains("appliances") || !j["appliances"].is_array()) {
    throw ValidationError("catalog: expected an object with an 'appliances' array");
  }
  std::vector<Appliance> apps;
  std::size_t index = 0;
  for (const json& ja : j["appliances"]) {
    ++index;
    const std::string where = "catalog: appliance " + std::to_string(index);
    try {
      Appliance a;
      a.name = ja.at("name").get<std::string>();
      a.standby_w = ja.value("standby_w", 0.0);
      for (const json& jm : ja.at("modes")) {
        a.modes.push_back({jm.at("rated_w").get<double>(), jm.value("deviation_w", 0.0)});
      }
      apps.push_back(std::move(a));
    } catch (const json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return ApplianceCatalog(std::move(apps));
}

inline ApplianceCatalog load_catalog(const std::filesystem::path& path) {
  auto in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("catalog '" + path.string() + "': " + e.what());
  }
  return catalog_from_json(j);
}

// ---------------------------------------------------------------------------
// Traces

struct GapEntry {
  /// 1-based data row after which samples were missing.
  std::size_t after_row = 0;
  double after_timestamp = 0.0;
  std::size_t missing = 0;
};

struct TraceIngest {
  AggregateTrace trace;
  std::vector<GapEntry> gaps;
};

/// Reads `timestamp,watts` or `watts` CSV. Missing timestamps at the sample
/// interval are filled by holding the previous reading. When
/// `sample_interval_s` is not given it is the first timestamp difference, or
/// 6 s for a watts-only file.
inline TraceIngest ingest_trace(const std::filesystem::path& path,
                                std::optional<double> sample_interval_s = std::nullopt) {
  if (sample_interval_s && !(*sample_interval_s > 0.0)) {
    throw ValidationError("trace: sample interval must be > 0");
  }
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ValidationError("trace '" + path.string() + "': empty file");
  ++line_no;
  const auto header = split_csv(line);
  bool with_time = false;
  if (header.size() == 2 && lower(header[0]) == "timestamp" && lower(header[1]) == "watts") {
    with_time = true;
  } else if (header.size() != 1 || lower(header[0]) != "watts") {
    throw ValidationError("trace '" + path.string() + "': header must be 'timestamp,watts' or 'watts'");
  }

  std::vector<double> stamps;
  std::vector<double> watts;
  std::vector<std::size_t> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    const std::string where = "trace '" + path.string() + "' row " + std::to_string(line_no);
    if (fields.size() != (with_time ? 2U : 1U)) throw ValidationError(where + ": wrong field count");
    const auto w = parse_double(fields.back());
    if (!w || !std::isfinite(*w)) throw ValidationError(where + ": watts is not a number");
    if (*w < 0.0) throw ValidationError(where + ": negative watts");
    if (with_time) {
      const auto ts = parse_double(fields[0]);
      if (!ts || !std::isfinite(*ts)) throw ValidationError(where + ": timestamp is not a number");
      if (!stamps.empty() && *ts <= stamps.back()) {
        throw ValidationError(where + ": timestamps are not strictly increasing");
      }
      stamps.push_back(*ts);
    }
    watts.push_back(*w);
    rows.push_back(line_no);
  }
  if (watts.empty()) throw ValidationError("trace '" + path.string() + "': no samples");

  TraceIngest out;
  double interval = sample_interval_s.value_or(6.0);
  if (with_time && !sample_interval_s && stamps.size() > 1) interval = stamps[1] - stamps[0];
  out.trace.sample_interval_s = interval;
  out.trace.start_time = with_time ? stamps.front() : 0.0;
  out.trace.samples.reserve(watts.size());
  for (std::size_t i = 0; i < watts.size(); ++i) {
    if (with_time && i > 0) {
      const double steps = std::round((stamps[i] - stamps[i - 1]) / interval);
      if (steps > 1.0) {
        const auto missing = static_cast<std::size_t>(steps) - 1;
        out.gaps.push_back({rows[i - 1] - 1, stamps[i - 1], missing});
        out.trace.samples.insert(out.trace.samples.end(), missing, watts[i - 1]);
      }
    }
    out.trace.samples.push_back(watts[i]);
  }
  out.trace.validate();
  return out;
}

inline void write_trace_csv(const std::filesystem::path& path, const AggregateTrace& trace) {
  auto out = open_output(path);
  out << "timestamp,watts\n";
  for (std::size_t t = 0; t < trace.size(); ++t) {
    out << format_double(trace.time_at(t)) << ',' << format_double(trace.samples[t]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// State and power matrices. One line per sample, one column per row/appliance.

inline void write_states_csv(const std::filesystem::path& path, const StateMatrix& states,
                             const ApplianceCatalog& catalog) {
  auto out = open_output(path);
  out << 't';
  for (std::size_t r = 0; r < catalog.row_count(); ++r) out << ',' << catalog.row_label(r);
  out << '\n';
  for (std::size_t t = 0; t < states.cols(); ++t) {
    out << t + 1;
    for (std::size_t r = 0; r < states.rows(); ++r) out << ',' << (states.at(r, t) ? '1' : '0');
    out << '\n';
  }
}

inline void write_power_csv(const std::filesystem::path& path,
                            const std::vector<std::vector<double>>& power,
                            const ApplianceCatalog& catalog) {
  auto out = open_output(path);
  out << 't';
  for (const Appliance& a : catalog.appliances()) out << ',' << a.name;
  out << '\n';
  const std::size_t T = power.empty() ? 0 : power.front().size();
  for (std::size_t t = 0; t < T; ++t) {
    out << t + 1;
    for (const auto& series : power) out << ',' << format_double(series[t]);
    out << '\n';
  }
}

namespace detail {

/// Reads a `t,<label>...` matrix whose labels must equal `expected`.
inline std::vector<std::vector<double>> read_labelled_matrix(const std::filesystem::path& path,
                                                             const std::vector<std::string>& expected) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("'" + path.string() + "': empty file");
  const auto header = split_csv(line);
  if (header.size() != expected.size() + 1 || header[0] != "t") {
    throw ValidationError("'" + path.string() + "': header does not match the catalog");
  }
  for (std::size_t k = 0; k < expected.size(); ++k) {
    if (header[k + 1] != expected[k]) {
      throw ValidationError("'" + path.string() + "': column '" + std::string(header[k + 1]) +
                            "' does not match catalog entry '" + expected[k] + "'");
    }
  }
  std::vector<std::vector<double>> cols(expected.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != expected.size() + 1) {
      throw ValidationError("'" + path.string() + "' row " + std::to_string(line_no) +
                            ": wrong field count");
    }
    for (std::size_t k = 0; k < expected.size(); ++k) {
      const auto v = parse_double(fields[k + 1]);
      if (!v) {
        throw ValidationError("'" + path.string() + "' row " + std::to_string(line_no) +
                              ": not a number");
      }
      cols[k].push_back(*v);
    }
  }
  return cols;
}

}  // namespace detail

inline StateMatrix read_states_csv(const std::filesystem::path& path, const ApplianceCatalog& catalog) {
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < catalog.row_count(); ++r) labels.push_back(catalog.row_label(r));
  const auto cols = detail::read_labelled_matrix(path, labels);
  const std::size_t T = cols.empty() ? 0 : cols.front().size();
  StateMatrix out(catalog.row_count(), T);
  for (std::size_t r = 0; r < cols.size(); ++r) {
    for (std::size_t t = 0; t < T; ++t) {
      if (cols[r][t] != 0.0 && cols[r][t] != 1.0) {
        throw ValidationError("'" + path.string() + "': state entries must be 0 or 1");
      }
      out.set(r, t, cols[r][t] == 1.0);
    }
  }
  return out;
}

inline std::vector<std::vector<double>> read_power_csv(const std::filesystem::path& path,
                                                       const ApplianceCatalog& catalog) {
  std::vector<std::string> labels;
  for (const Appliance& a : catalog.appliances()) labels.push_back(a.name);
  return detail::read_labelled_matrix(path, labels);
}

// ---------------------------------------------------------------------------
// Epochs, residuals, diagnostics

inline void write_epochs_csv(std::ostream& out, const std::vector<ActiveEpoch>& epochs,
                             const AggregateTrace& trace) {
  out << "start_index,end_index,start_time,end_time,peak_w\n";
  for (const ActiveEpoch& w : epochs) {
    out << w.start << ',' << w.end << ',' << format_double(trace.time_at(w.start - 1)) << ','
        << format_double(trace.time_at(w.end - 1)) << ',' << format_double(epoch_peak(trace, w))
        << '\n';
  }
}

inline void write_residual_csv(const std::filesystem::path& path, const AggregateTrace& trace,
                               const DisaggregationResult& result) {
  auto out = open_output(path);
  out << "t,timestamp,observed_w,estimated_w,residual_w\n";
  for (std::size_t t = 0; t < trace.size(); ++t) {
    out << t + 1 << ',' << format_double(trace.time_at(t)) << ',' << format_double(trace.samples[t])
        << ',' << format_double(trace.samples[t] - result.residual[t]) << ','
        << format_double(result.residual[t]) << '\n';
  }
}

inline json diagnostics_to_json(const DisaggregationResult& result) {
  json epochs = json::array();
  for (const EpochReport& r : result.epoch_reports) {
    const EpochSolution& s = r.solution;
    epochs.push_back({{"start_index", s.window.start},
                      {"end_index", s.window.end},
                      {"tv", s.tv},
                      {"unique", s.unique},
                      {"slack_policy", r.policy.describe()},
                      {"infeasible_columns", s.infeasible_columns},
                      {"nodes_explored", s.stats.nodes_explored},
                      {"transition_work", s.stats.transition_work},
                      {"pairwise_steps", s.stats.pairwise_steps},
                      {"lattice_steps", s.stats.lattice_steps},
                      {"wall_time_s", s.stats.wall_time_s}});
  }
  double max_abs_residual = 0.0;
  for (double r : result.residual) max_abs_residual = std::max(max_abs_residual, std::abs(r));
  return {{"method", result.method},
          {"baseline_w", result.baseline_w},
          {"rows", result.states.rows()},
          {"samples", result.states.cols()},
          {"epoch_count", result.epochs.size()},
          {"total_tv", result.total_tv},
          {"epoch_tv_sum", result.epoch_tv_sum},
          {"flagged_columns", result.flagged_columns},
          {"max_abs_residual_w", max_abs_residual},
          {"runtime_s", result.runtime_s},
          {"peak_memory_mb_approx", peak_memory_mb()},
          {"epochs", epochs}};
}

/// Writes states.csv, power.csv, epochs.csv, residual.csv and diagnostics.json.
inline void write_result(const std::filesystem::path& dir, const AggregateTrace& trace,
                         const ApplianceCatalog& catalog, const DisaggregationResult& result) {
  std::filesystem::create_directories(dir);
  write_states_csv(dir / "states.csv", result.states, catalog);
  write_power_csv(dir / "power.csv", result.estimated_power, catalog);
  {
    auto out = open_output(dir / "epochs.csv");
    write_epochs_csv(out, result.epochs, trace);
  }
  write_residual_csv(dir / "residual.csv", trace, result);
  write_json(dir / "diagnostics.json", diagnostics_to_json(result));
}

// ---------------------------------------------------------------------------
// Evaluation reports

inline json report_to_json(const EvaluationReport& r, const ApplianceCatalog& catalog) {
  json shares = json::array();
  for (std::size_t a = 0; a < catalog.appliance_count(); ++a) {
    shares.push_back({{"appliance", catalog.appliance(a).name},
                      {"true", r.shares_true.at(a)},
                      {"estimated", r.shares_estimated.at(a)}});
  }
  return {{"eda", r.eda},
          {"spa", r.spa},
          {"energy_shares", shares},
          {"runtime_s", r.runtime_s},
          {"peak_memory_mb_approx", r.peak_memory_estimate_mb}};
}

inline void write_sweep_csv(const std::filesystem::path& path,
                            const std::vector<std::pair<double, EvaluationReport>>& sweep) {
  auto out = open_output(path);
  out << "rho,eda,spa,runtime_s\n";
  for (const auto& [rho, r] : sweep) {
    out << format_double(rho) << ',' << format_double(r.eda) << ',' << format_double(r.spa) << ','
        << format_double(r.runtime_s) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Scenario files

inline json scenario_to_json(const ScenarioSpec& s) {
  return {{"duration", s.duration},
          {"epoch_count", s.epoch_count},
          {"epoch_length_mean", s.epoch_length_mean},
          {"epoch_length_max", s.epoch_length_max},
          {"events_per_epoch", s.events_per_epoch},
          {"noise", to_string(s.noise)},
          {"seed", s.seed},
          {"oracle_checkable", s.oracle_checkable},
          {"sample_interval_s", s.sample_interval_s},
          {"start_time", s.start_time}};
}

inline ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec s;
  try {
    s.duration = j.value("duration", s.duration);
    s.epoch_count = j.value("epoch_count", s.epoch_count);
    s.epoch_length_mean = j.value("epoch_length_mean", s.epoch_length_mean);
    s.epoch_length_max = j.value("epoch_length_max", s.epoch_length_max);
    s.events_per_epoch = j.value("events_per_epoch", s.events_per_epoch);
    s.noise = parse_noise_rule(j.value("noise", to_string(s.noise)));
    s.seed = j.value("seed", s.seed);
    s.oracle_checkable = j.value("oracle_checkable", s.oracle_checkable);
    s.sample_interval_s = j.value("sample_interval_s", s.sample_interval_s);
    s.start_time = j.value("start_time", s.start_time);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario: ") + e.what());
  }
  return s;
}

/// Writes trace.csv, truth_states.csv, truth_power.csv and scenario.json.
inline void write_scenario(const std::filesystem::path& dir, const Scenario& scenario,
                           const ScenarioSpec& spec, const ApplianceCatalog& catalog) {
  std::filesystem::create_directories(dir);
  write_trace_csv(dir / "trace.csv", scenario.trace);
  write_states_csv(dir / "truth_states.csv", scenario.truth.states, catalog);
  write_power_csv(dir / "truth_power.csv", scenario.truth.per_appliance_power, catalog);
  json windows = json::array();
  for (const ActiveEpoch& w : scenario.placed_windows) windows.push_back({w.start, w.end});
  json j = scenario_to_json(spec);
  j["catalog"] = catalog_to_json(catalog);
  j["placed_windows"] = windows;
  write_json(dir / "scenario.json", j);
}

inline GroundTruth read_truth(const std::filesystem::path& dir, const ApplianceCatalog& catalog) {
  GroundTruth truth;
  truth.states = read_states_csv(dir / "truth_states.csv", catalog);
  truth.per_appliance_power = read_power_csv(dir / "truth_power.csv", catalog);
  return truth;
}

// ---------------------------------------------------------------------------
// Run configuration

enum class Method { sser, lse };

inline std::string to_string(Method m) { return m == Method::sser ? "sser" : "lse"; }

inline Method parse_method(const std::string& s) {
  if (s == "sser") return Method::sser;
  if (s == "lse") return Method::lse;
  throw ValidationError("unknown method '" + s + "' (expected sser|lse)");
}

struct RunConfig {
  Method method = Method::sser;
  /// "strict" disables the fallback pass; "widen" re-solves flagged epochs
  /// with deviations scaled by widen_factor.
  std::string slack = "widen";
  double widen_factor = 1.5;
  std::size_t budget = 10'000'000;
  std::optional<double> baseline_w;
  std::size_t jobs = 1;
  std::filesystem::path out_dir;
  std::vector<double> rhos = default_rho_grid();

  void validate() const {
    if (slack != "strict" && slack != "widen") {
      throw ValidationError("config: slack must be 'strict' or 'widen'");
    }
    if (!(widen_factor >= 1.0)) throw ValidationError("config: widen factor must be >= 1");
    if (budget == 0) throw ValidationError("config: budget must be > 0");
    if (jobs < 1) throw ValidationError("config: parallelism must be >= 1");
    if (baseline_w && !(*baseline_w >= 0.0)) throw ValidationError("config: baseline must be >= 0");
    for (double r : rhos) {
      if (!(r > 0.0)) throw ValidationError("config: every rho must be > 0");
    }
  }

  DisaggregationOptions disaggregation_options() const {
    DisaggregationOptions o;
    o.baseline_override = baseline_w;
    o.fallback = slack == "strict" ? std::nullopt
                                   : std::optional<SlackPolicy>(SlackPolicy::widen(widen_factor));
    o.solver.max_nodes = budget;
    o.jobs = jobs;
    return o;
  }

  json to_json() const {
    json j = {{"method", to_string(method)}, {"slack", slack},   {"widen_factor", widen_factor},
              {"budget", budget},            {"jobs", jobs},     {"rhos", rhos},
              {"out_dir", out_dir.string()}};
    j["baseline_w"] = baseline_w ? json(*baseline_w) : json(nullptr);
    return j;
  }

  /// Overlays the keys present in `j` onto this configuration.
  void merge_json(const json& j) {
    try {
      if (j.contains("method")) method = parse_method(j["method"].get<std::string>());
      if (j.contains("slack")) slack = j["slack"].get<std::string>();
      if (j.contains("widen_factor")) widen_factor = j["widen_factor"].get<double>();
      if (j.contains("budget")) budget = static_cast<std::size_t>(j["budget"].get<double>());
      if (j.contains("baseline_w") && !j["baseline_w"].is_null()) {
        baseline_w = j["baseline_w"].get<double>();
      }
      if (j.contains("jobs")) jobs = j["jobs"].get<std::size_t>();
      if (j.contains("rhos")) rhos = j["rhos"].get<std::vector<double>>();
      if (j.contains("out_dir")) out_dir = j["out_dir"].get<std::string>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("config: ") + e.what());
    }
  }
};

inline json read_config_json(const std::filesystem::path& path) {
  auto in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config '" + path.string() + "': " + e.what());
  }
  if (!j.is_object()) throw ValidationError("config '" + path.string() + "': expected an object");
  return j;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c;
  c.merge_json(read_config_json(path));
  return c;
}

}  // namespace sser
