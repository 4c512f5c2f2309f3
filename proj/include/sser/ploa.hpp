#pragma once

// Parallel local optimisation: detect active epochs, solve every epoch's
// subproblem independently (concurrently when jobs > 1), and merge the
// solutions into a full state matrix with every appliance in stand-by outside
// the epochs.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sser/epochs.hpp"
#include "sser/model.hpp"
#include "sser/solver.hpp"

namespace sser {

/// Environment variable holding the default number of worker threads.
inline constexpr const char* kJobsEnvVar = "SSER_JOBS";

inline std::size_t default_parallelism() {
  if (const char* env = std::getenv(kJobsEnvVar)) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

struct DisaggregationOptions {
  /// Replaces the catalog's baseline for epoch detection.
  std::optional<double> baseline_override;
  /// Slack used on a second pass over epochs whose strict pass left
  /// infeasible columns. std::nullopt keeps the strict result.
  std::optional<SlackPolicy> fallback = SlackPolicy::widen(1.5);
  SolverOptions solver;
  std::size_t jobs = 1;
};

struct EpochReport {
  EpochSolution solution;
  /// Policy under which `solution` was obtained.
  SlackPolicy policy;
};

struct DisaggregationResult {
  std::string method = "sser";
  double baseline_w = 0.0;
  /// Full N x T state matrix.
  StateMatrix states;
  /// Per physical appliance, T samples: active mode's rated power, else stand-by.
  std::vector<std::vector<double>> estimated_power;
  std::vector<ActiveEpoch> epochs;
  std::size_t total_tv = 0;
  /// Sum of per-epoch objective values.
  std::size_t epoch_tv_sum = 0;
  std::vector<EpochReport> epoch_reports;
  /// 1-based columns whose state fails the interval test: infeasible epoch
  /// columns and stand-by columns whose reading is not the stand-by level.
  std::vector<std::size_t> flagged_columns;
  /// X - reconstructed aggregate.
  std::vector<double> residual;
  double runtime_s = 0.0;
};

/// Per-appliance power implied by a state matrix.
inline std::vector<std::vector<double>> estimate_power(const StateMatrix& states,
                                                       const ApplianceCatalog& catalog) {
  if (states.rows() != catalog.row_count()) {
    throw DimensionError("estimate_power: state rows do not match the catalog");
  }
  std::vector<std::vector<double>> power(catalog.appliance_count(),
                                         std::vector<double>(states.cols(), 0.0));
  for (std::size_t t = 0; t < states.cols(); ++t) {
    const StateColumn s = states.column(t);
    for (std::size_t a = 0; a < catalog.appliance_count(); ++a) {
      const int m = catalog.active_mode(s, a);
      power[a][t] = m < 0 ? catalog.appliance(a).standby_w
                          : catalog.rated()[catalog.mode_group(a).first_row +
                                            static_cast<std::size_t>(m)];
    }
  }
  return power;
}

/// Column sums of the per-appliance estimates.
inline std::vector<double> reconstruct_aggregate(const DisaggregationResult& result,
                                                 const ApplianceCatalog& catalog) {
  const std::size_t T = result.states.cols();
  std::vector<double> out(T, 0.0);
  const auto power = result.estimated_power.empty()
                         ? estimate_power(result.states, catalog)
                         : result.estimated_power;
  for (const auto& series : power) {
    for (std::size_t t = 0; t < T; ++t) out[t] += series[t];
  }
  return out;
}

/// Fills states-derived fields (power, TV, residual) of a result.
inline void finalize_result(DisaggregationResult& result, const AggregateTrace& trace,
                            const ApplianceCatalog& catalog) {
  result.estimated_power = estimate_power(result.states, catalog);
  result.total_tv = total_variation(result.states);
  const std::vector<double> recon = reconstruct_aggregate(result, catalog);
  result.residual.resize(recon.size());
  for (std::size_t t = 0; t < recon.size(); ++t) {
    result.residual[t] = trace.samples[t] - recon[t];
  }
}

/// Merges per-epoch solutions (in any order) into a full result. Columns
/// outside every epoch are stand-by.
inline DisaggregationResult assemble_result(const AggregateTrace& trace,
                                            const ApplianceCatalog& catalog,
                                            std::vector<ActiveEpoch> epochs,
                                            std::vector<EpochReport> reports,
                                            double baseline_w) {
  std::sort(reports.begin(), reports.end(), [](const EpochReport& a, const EpochReport& b) {
    return a.solution.window.start < b.solution.window.start;
  });
  DisaggregationResult result;
  result.baseline_w = baseline_w;
  result.states = StateMatrix(catalog.row_count(), trace.size());
  result.epochs = std::move(epochs);
  for (const EpochReport& r : reports) {
    const EpochSolution& sol = r.solution;
    for (std::size_t j = 0; j < sol.states.cols(); ++j) {
      result.states.set_column(sol.window.start - 1 + j, sol.states.column(j));
    }
    result.epoch_tv_sum += sol.tv;
    result.flagged_columns.insert(result.flagged_columns.end(), sol.infeasible_columns.begin(),
                                  sol.infeasible_columns.end());
  }
  const StateColumn standby{};
  for (std::size_t t : coverage_complement(result.epochs, trace.size())) {
    if (!catalog.is_feasible(trace.samples[t - 1], standby)) result.flagged_columns.push_back(t);
  }
  std::sort(result.flagged_columns.begin(), result.flagged_columns.end());
  result.epoch_reports = std::move(reports);
  finalize_result(result, trace, catalog);
  return result;
}

/// Solves one epoch: strict pass, then the fallback slack if the strict pass
/// left infeasible columns (or found none feasible at all).
inline EpochReport solve_epoch_with_fallback(const EpochProblem& problem,
                                             const DisaggregationOptions& options) {
  try {
    EpochReport report{solve_epoch(problem, options.solver), SlackPolicy::strict()};
    if (report.solution.infeasible_columns.empty() || !options.fallback) return report;
  } catch (const InfeasibleError&) {
    if (!options.fallback) throw;
  }
  const SlackPolicy policy = *options.fallback;
  return {solve_epoch(apply_slack(problem, policy), options.solver), policy};
}

/// Full pipeline. Results do not depend on `options.jobs`.
inline DisaggregationResult disaggregate(const AggregateTrace& trace,
                                         const ApplianceCatalog& catalog,
                                         const DisaggregationOptions& options = {}) {
  const auto started = std::chrono::steady_clock::now();
  trace.validate();
  if (options.jobs < 1) throw ValidationError("parallelism must be >= 1");
  const double baseline = options.baseline_override.value_or(catalog.baseline_w());
  if (!(baseline >= 0.0)) throw ValidationError("baseline must be >= 0");

  std::vector<ActiveEpoch> epochs = detect_active_epochs(trace, baseline);
  const auto shared = std::make_shared<const ApplianceCatalog>(catalog);
  std::vector<EpochReport> reports(epochs.size());
  std::vector<std::exception_ptr> errors(epochs.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < epochs.size(); k = next++) {
      try {
        reports[k] = solve_epoch_with_fallback(make_epoch_problem(trace, epochs[k], shared),
                                               options);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(options.jobs, std::max<std::size_t>(1, epochs.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  // Report the earliest failing epoch so the error is independent of scheduling.
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  DisaggregationResult result =
      assemble_result(trace, catalog, std::move(epochs), std::move(reports), baseline);
  result.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

/// Equality of every output except timing.
inline bool same_outcome(const DisaggregationResult& a, const DisaggregationResult& b) {
  if (a.method != b.method || a.baseline_w != b.baseline_w || !(a.states == b.states) ||
      a.estimated_power != b.estimated_power || a.epochs != b.epochs ||
      a.total_tv != b.total_tv || a.epoch_tv_sum != b.epoch_tv_sum ||
      a.flagged_columns != b.flagged_columns || a.residual != b.residual ||
      a.epoch_reports.size() != b.epoch_reports.size()) {
    return false;
  }
  for (std::size_t k = 0; k < a.epoch_reports.size(); ++k) {
    if (!a.epoch_reports[k].solution.same_outcome(b.epoch_reports[k].solution) ||
        !(a.epoch_reports[k].policy == b.epoch_reports[k].policy)) {
      return false;
    }
  }
  return true;
}

}  // namespace sser
