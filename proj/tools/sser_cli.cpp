// Command-line front end: simulate, detect-epochs, disaggregate, evaluate,
// sweep, catalog validate.
//
// Exit codes: 0 success, 1 other failure, 2 validation error, 3 infeasible,
// 4 search budget exceeded.

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sser/sser.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kValidation = 2,
  kInfeasible = 3,
  kBudget = 4,
};

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

/// Records what is needed to reproduce a run.
struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  sser::json config = sser::json::object();
  std::vector<fs::path> inputs;

  void write(const fs::path& path) const {
    sser::json inputs_json = sser::json::object();
    for (const fs::path& p : inputs) inputs_json[p.string()] = {{"sha256", sha256_file(p)}};
    sser::write_json(path, {{"tool", "sser"},
                            {"version", kVersion},
                            {"command", command},
                            {"argv", argv},
                            {"config", config},
                            {"inputs", inputs_json},
                            {"json_library", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                 std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                 std::to_string(NLOHMANN_JSON_VERSION_PATCH)}});
  }
};

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return kOk;
  } catch (const sser::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const sser::DimensionError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const sser::UndefinedMetricError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const sser::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const sser::ResourceError& e) {
    std::cerr << "budget exceeded: " << e.what() << " (nodes explored: " << e.nodes_explored()
              << ")\n";
    return kBudget;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}

/// Flags shared by disaggregate and sweep.
struct RunFlags {
  std::string config_path;
  std::string method;
  std::string slack;
  double widen_factor = 0.0;
  double budget = 0.0;
  double baseline = 0.0;
  std::size_t jobs = 0;
  CLI::Option* method_opt = nullptr;
  CLI::Option* slack_opt = nullptr;
  CLI::Option* widen_opt = nullptr;
  CLI::Option* budget_opt = nullptr;
  CLI::Option* baseline_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;

  void attach(CLI::App* cmd, bool with_method) {
    cmd->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    if (with_method) method_opt = cmd->add_option("--method", method, "sser | lse");
    slack_opt = cmd->add_option("--slack", slack, "strict | widen (fallback after a strict pass)");
    widen_opt = cmd->add_option("--widen-factor", widen_factor, "deviation factor for --slack widen");
    budget_opt = cmd->add_option("--budget", budget, "max search nodes per epoch");
    baseline_opt = cmd->add_option("--baseline", baseline, "baseline power override (W)");
    jobs_opt = cmd->add_option("--jobs", jobs, "worker threads (default $SSER_JOBS or all cores)");
  }

  sser::RunConfig resolve() const {
    sser::RunConfig c;
    c.jobs = sser::default_parallelism();
    if (!config_path.empty()) c.merge_json(sser::read_config_json(config_path));
    if (method_opt && method_opt->count()) c.method = sser::parse_method(method);
    if (slack_opt->count()) c.slack = slack;
    if (widen_opt->count()) c.widen_factor = widen_factor;
    if (budget_opt->count()) {
      if (!(budget >= 1.0)) throw sser::ValidationError("--budget must be >= 1");
      c.budget = static_cast<std::size_t>(budget);
    }
    if (baseline_opt->count()) c.baseline_w = baseline;
    if (jobs_opt->count()) c.jobs = jobs;
    c.validate();
    return c;
  }
};

std::optional<double> optional_interval(const CLI::Option* opt, double value) {
  return opt->count() ? std::optional<double>(value) : std::nullopt;
}

void report_gaps(const sser::TraceIngest& ingest) {
  for (const auto& g : ingest.gaps) {
    std::cerr << "gap: " << g.missing << " sample(s) missing after data row " << g.after_row
              << " (timestamp " << sser::format_double(g.after_timestamp)
              << "), held previous value\n";
  }
}

sser::DisaggregationResult run_method(const sser::RunConfig& config,
                                      const sser::AggregateTrace& trace,
                                      const sser::ApplianceCatalog& catalog) {
  if (config.method == sser::Method::lse) return sser::solve_lse(trace, catalog);
  return sser::disaggregate(trace, catalog, config.disaggregation_options());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Appliance-level disaggregation of aggregated power traces by sparse "
               "switching-event recovery"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Manifest manifest;
  manifest.argv.assign(argv, argv + argc);

  // simulate ---------------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic trace with ground truth");
  std::string sim_catalog, sim_out, sim_scenario, sim_noise;
  sser::ScenarioSpec sim_spec;
  simulate->add_option("--catalog", sim_catalog, "appliance catalog JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", sim_out, "output directory")->required();
  simulate->add_option("--scenario", sim_scenario, "scenario JSON (flags override)")->check(CLI::ExistingFile);
  auto* o_duration = simulate->add_option("--duration", sim_spec.duration, "samples");
  auto* o_epochs = simulate->add_option("--epochs", sim_spec.epoch_count, "number of active windows");
  auto* o_len_mean = simulate->add_option("--epoch-length-mean", sim_spec.epoch_length_mean);
  auto* o_len_max = simulate->add_option("--epoch-length-max", sim_spec.epoch_length_max);
  auto* o_events = simulate->add_option("--events-per-epoch", sim_spec.events_per_epoch, "on/off pulses per window");
  auto* o_noise = simulate->add_option("--noise", sim_noise, "none | uniform");
  auto* o_seed = simulate->add_option("--seed", sim_spec.seed);
  auto* o_interval = simulate->add_option("--interval", sim_spec.sample_interval_s, "seconds");
  auto* o_start = simulate->add_option("--start-time", sim_spec.start_time, "seconds");
  auto* o_oracle = simulate->add_flag("--oracle-checkable", sim_spec.oracle_checkable);

  // detect-epochs ----------------------------------------------------------
  auto* detect = app.add_subcommand("detect-epochs", "list active epochs as CSV");
  std::string det_trace, det_catalog, det_out;
  double det_baseline = 0.0, det_interval = 6.0;
  detect->add_option("--trace", det_trace)->required()->check(CLI::ExistingFile);
  detect->add_option("--catalog", det_catalog, "catalog supplying the baseline")->check(CLI::ExistingFile);
  auto* det_baseline_opt = detect->add_option("--baseline", det_baseline, "baseline power (W)");
  auto* det_interval_opt = detect->add_option("--interval", det_interval, "sample interval (s)");
  detect->add_option("--out", det_out, "output CSV (default: stdout)");

  // disaggregate -----------------------------------------------------------
  auto* disagg = app.add_subcommand("disaggregate", "recover appliance states and power");
  std::string dis_trace, dis_catalog, dis_out;
  double dis_interval = 6.0;
  RunFlags dis_flags;
  disagg->add_option("--trace", dis_trace)->required()->check(CLI::ExistingFile);
  disagg->add_option("--catalog", dis_catalog)->required()->check(CLI::ExistingFile);
  disagg->add_option("--out", dis_out, "output directory");
  auto* dis_interval_opt = disagg->add_option("--interval", dis_interval, "sample interval (s)");
  dis_flags.attach(disagg, true);

  // evaluate ---------------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "score a result directory against ground truth");
  std::string ev_catalog, ev_truth, ev_result, ev_out;
  evaluate->add_option("--catalog", ev_catalog)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--truth", ev_truth, "directory with truth_states.csv and truth_power.csv")
      ->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--result", ev_result, "directory written by disaggregate")
      ->required()->check(CLI::ExistingDirectory);
  evaluate->add_option("--out", ev_out, "output directory (default: --result)");

  // sweep ------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "rerun with scaled deviations and evaluate each run");
  std::string sw_trace, sw_catalog, sw_truth, sw_out;
  std::vector<double> sw_rhos;
  double sw_interval = 6.0;
  RunFlags sw_flags;
  sweep->add_option("--trace", sw_trace)->required()->check(CLI::ExistingFile);
  sweep->add_option("--catalog", sw_catalog)->required()->check(CLI::ExistingFile);
  sweep->add_option("--truth", sw_truth)->required()->check(CLI::ExistingDirectory);
  sweep->add_option("--out", sw_out, "output directory")->required();
  auto* sw_rhos_opt = sweep->add_option("--rhos", sw_rhos, "deviation factors")->delimiter(',');
  auto* sw_interval_opt = sweep->add_option("--interval", sw_interval, "sample interval (s)");
  sw_flags.attach(sweep, false);

  // catalog validate -------------------------------------------------------
  auto* catalog_cmd = app.add_subcommand("catalog", "catalog utilities");
  catalog_cmd->require_subcommand(1);
  auto* validate = catalog_cmd->add_subcommand("validate", "check a catalog file");
  std::string val_path;
  validate->add_option("path", val_path)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  if (simulate->parsed()) {
    return run_guarded([&] {
      const sser::ApplianceCatalog catalog = sser::load_catalog(sim_catalog);
      sser::ScenarioSpec spec;
      if (!sim_scenario.empty()) spec = sser::scenario_from_json(sser::read_config_json(sim_scenario));
      if (o_duration->count()) spec.duration = sim_spec.duration;
      if (o_epochs->count()) spec.epoch_count = sim_spec.epoch_count;
      if (o_len_mean->count()) spec.epoch_length_mean = sim_spec.epoch_length_mean;
      if (o_len_max->count()) spec.epoch_length_max = sim_spec.epoch_length_max;
      if (o_events->count()) spec.events_per_epoch = sim_spec.events_per_epoch;
      if (o_noise->count()) spec.noise = sser::parse_noise_rule(sim_noise);
      if (o_seed->count()) spec.seed = sim_spec.seed;
      if (o_interval->count()) spec.sample_interval_s = sim_spec.sample_interval_s;
      if (o_start->count()) spec.start_time = sim_spec.start_time;
      if (o_oracle->count()) spec.oracle_checkable = true;
      const sser::Scenario scenario = sser::generate(catalog, spec);
      sser::write_scenario(sim_out, scenario, spec, catalog);
      manifest.command = "simulate";
      manifest.config = sser::scenario_to_json(spec);
      manifest.inputs = {sim_catalog};
      if (!sim_scenario.empty()) manifest.inputs.emplace_back(sim_scenario);
      manifest.write(fs::path(sim_out) / "manifest.json");
      std::cout << "wrote " << scenario.trace.size() << " samples, "
                << scenario.placed_windows.size() << " active windows to " << sim_out << '\n';
    });
  }

  if (detect->parsed()) {
    return run_guarded([&] {
      if (det_catalog.empty() && !det_baseline_opt->count()) {
        throw sser::ValidationError("detect-epochs needs --catalog or --baseline");
      }
      const auto ingest = sser::ingest_trace(det_trace, optional_interval(det_interval_opt, det_interval));
      report_gaps(ingest);
      const double baseline = det_baseline_opt->count()
                                  ? det_baseline
                                  : sser::load_catalog(det_catalog).baseline_w();
      const auto epochs = sser::detect_active_epochs(ingest.trace, baseline);
      if (det_out.empty()) {
        sser::write_epochs_csv(std::cout, epochs, ingest.trace);
        return;
      }
      {
        auto out = sser::open_output(det_out);
        sser::write_epochs_csv(out, epochs, ingest.trace);
      }
      manifest.command = "detect-epochs";
      manifest.config = {{"baseline_w", baseline}, {"sample_interval_s", ingest.trace.sample_interval_s}};
      manifest.inputs = {det_trace};
      if (!det_catalog.empty()) manifest.inputs.emplace_back(det_catalog);
      manifest.write(det_out + ".manifest.json");
    });
  }

  if (disagg->parsed()) {
    return run_guarded([&] {
      sser::RunConfig config = dis_flags.resolve();
      if (!dis_out.empty()) config.out_dir = dis_out;
      if (config.out_dir.empty()) throw sser::ValidationError("disaggregate needs --out");
      const sser::ApplianceCatalog catalog = sser::load_catalog(dis_catalog);
      const auto ingest = sser::ingest_trace(dis_trace, optional_interval(dis_interval_opt, dis_interval));
      report_gaps(ingest);
      const sser::DisaggregationResult result = run_method(config, ingest.trace, catalog);
      sser::write_result(config.out_dir, ingest.trace, catalog, result);
      manifest.command = "disaggregate";
      manifest.config = config.to_json();
      manifest.inputs = {dis_trace, dis_catalog};
      if (!dis_flags.config_path.empty()) manifest.inputs.emplace_back(dis_flags.config_path);
      manifest.write(config.out_dir / "manifest.json");
      std::cout << result.method << ": " << result.epochs.size() << " epochs, total TV "
                << result.total_tv << ", " << result.flagged_columns.size()
                << " flagged columns, " << sser::format_double(result.runtime_s) << " s\n";
    });
  }

  if (evaluate->parsed()) {
    return run_guarded([&] {
      const sser::ApplianceCatalog catalog = sser::load_catalog(ev_catalog);
      const sser::GroundTruth truth = sser::read_truth(ev_truth, catalog);
      sser::DisaggregationResult result;
      result.states = sser::read_states_csv(fs::path(ev_result) / "states.csv", catalog);
      result.estimated_power = sser::read_power_csv(fs::path(ev_result) / "power.csv", catalog);
      if (const fs::path diag = fs::path(ev_result) / "diagnostics.json"; fs::exists(diag)) {
        std::ifstream in(diag);
        result.runtime_s = sser::json::parse(in).value("runtime_s", 0.0);
      }
      const sser::EvaluationReport report = sser::evaluate(truth, result, catalog);
      const fs::path out_dir = ev_out.empty() ? fs::path(ev_result) : fs::path(ev_out);
      sser::write_json(out_dir / "report.json", sser::report_to_json(report, catalog));
      sser::write_sweep_csv(out_dir / "report.csv", {{1.0, report}});
      manifest.command = "evaluate";
      manifest.inputs = {ev_catalog, fs::path(ev_truth) / "truth_states.csv",
                         fs::path(ev_truth) / "truth_power.csv", fs::path(ev_result) / "states.csv",
                         fs::path(ev_result) / "power.csv"};
      manifest.write(out_dir / "evaluate.manifest.json");
      std::cout << "EDA " << sser::format_double(report.eda) << "  SPA "
                << sser::format_double(report.spa) << '\n';
    });
  }

  if (sweep->parsed()) {
    return run_guarded([&] {
      sser::RunConfig config = sw_flags.resolve();
      if (sw_rhos_opt->count()) config.rhos = sw_rhos;
      config.out_dir = sw_out;
      config.validate();
      const sser::ApplianceCatalog catalog = sser::load_catalog(sw_catalog);
      const auto ingest = sser::ingest_trace(sw_trace, optional_interval(sw_interval_opt, sw_interval));
      report_gaps(ingest);
      const sser::GroundTruth truth = sser::read_truth(sw_truth, catalog);
      const auto results = sser::robustness_sweep(ingest.trace, catalog, truth, config.rhos,
                                                  config.disaggregation_options());
      sser::json rows = sser::json::array();
      for (const auto& [rho, report] : results) {
        sser::json row = sser::report_to_json(report, catalog);
        row["rho"] = rho;
        rows.push_back(row);
        std::cout << "rho " << sser::format_double(rho) << "  EDA " << sser::format_double(report.eda)
                  << "  SPA " << sser::format_double(report.spa) << '\n';
      }
      sser::write_json(fs::path(sw_out) / "sweep.json", {{"runs", rows}});
      sser::write_sweep_csv(fs::path(sw_out) / "sweep.csv", results);
      manifest.command = "sweep";
      manifest.config = config.to_json();
      manifest.inputs = {sw_trace, sw_catalog, fs::path(sw_truth) / "truth_states.csv",
                         fs::path(sw_truth) / "truth_power.csv"};
      manifest.write(fs::path(sw_out) / "manifest.json");
    });
  }

  if (validate->parsed()) {
    return run_guarded([&] {
      const sser::ApplianceCatalog catalog = sser::load_catalog(val_path);
      std::cout << "ok: " << catalog.appliance_count() << " appliances, " << catalog.row_count()
                << " virtual rows, baseline " << sser::format_double(catalog.baseline_w()) << " W\n";
    });
  }
  return kFailure;
}
