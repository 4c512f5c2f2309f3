#pragma once

// Accuracy metrics against ground truth and the deviation-scaling sweep.
//
//   EDA = 1 - Σₙ ‖X⁽ⁿ⁾ - X̂⁽ⁿ⁾‖₁ / ‖X‖₁   over physical appliances, where X̂⁽ⁿ⁾ is
//         the active mode's rated power, or stand-by when all modes are off,
//         and ‖X‖₁ is the total true energy;
//   SPA = 1 - Σₙ ‖S⁽ⁿ⁾ - Ŝ⁽ⁿ⁾‖₁ / (N·T)   over virtual-appliance rows.

#include <chrono>
#include <cmath>
#include <utility>
#include <vector>

#if defined(__unix__) || defined(__APPLE__)
#include <sys/resource.h>
#endif

#include "sser/model.hpp"
#include "sser/ploa.hpp"

namespace sser {

struct GroundTruth {
  /// Per physical appliance, T samples.
  std::vector<std::vector<double>> per_appliance_power;
  StateMatrix states;

  /// Largest |Σₙ X⁽ⁿ⁾ₜ - Xₜ| over t.
  double max_aggregate_mismatch(const AggregateTrace& trace) const {
    double worst = 0.0;
    for (std::size_t t = 0; t < trace.size(); ++t) {
      double sum = 0.0;
      for (const auto& series : per_appliance_power) sum += series.at(t);
      worst = std::max(worst, std::abs(sum - trace.samples[t]));
    }
    return worst;
  }
};

struct EvaluationReport {
  double eda = 0.0;
  double spa = 0.0;
  std::vector<double> shares_true;
  std::vector<double> shares_estimated;
  double runtime_s = 0.0;
  /// Peak resident set size of the process in MiB. Approximate.
  double peak_memory_estimate_mb = 0.0;
};

inline double eda(const GroundTruth& truth, const DisaggregationResult& result,
                  const ApplianceCatalog& catalog) {
  const auto& x = truth.per_appliance_power;
  const auto estimate =
      result.estimated_power.empty() ? estimate_power(result.states, catalog) : result.estimated_power;
  if (x.size() != catalog.appliance_count() || estimate.size() != x.size()) {
    throw DimensionError("eda: appliance count mismatch");
  }
  double error = 0.0;
  double total = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    if (x[n].size() != estimate[n].size()) throw DimensionError("eda: series length mismatch");
    for (std::size_t t = 0; t < x[n].size(); ++t) {
      error += std::abs(x[n][t] - estimate[n][t]);
      total += std::abs(x[n][t]);
    }
  }
  if (total == 0.0) throw UndefinedMetricError("eda: total true energy is zero");
  return 1.0 - error / total;
}

inline double spa(const StateMatrix& truth_states, const StateMatrix& est_states) {
  if (truth_states.rows() != est_states.rows() || truth_states.cols() != est_states.cols()) {
    throw DimensionError("spa: state matrices differ in shape");
  }
  const std::size_t cells = truth_states.rows() * truth_states.cols();
  if (cells == 0) throw UndefinedMetricError("spa: empty state matrix");
  std::size_t wrong = 0;
  for (std::size_t n = 0; n < truth_states.rows(); ++n) {
    for (std::size_t t = 0; t < truth_states.cols(); ++t) {
      wrong += truth_states.at(n, t) != est_states.at(n, t) ? 1 : 0;
    }
  }
  return 1.0 - static_cast<double>(wrong) / static_cast<double>(cells);
}

/// Fraction of the total energy drawn by each appliance.
inline std::vector<double> energy_shares(const std::vector<std::vector<double>>& power) {
  if (power.empty()) throw DimensionError("energy_shares: no appliances");
  std::vector<double> totals(power.size(), 0.0);
  double grand = 0.0;
  for (std::size_t n = 0; n < power.size(); ++n) {
    for (double w : power[n]) totals[n] += w;
    grand += totals[n];
  }
  if (grand == 0.0) throw UndefinedMetricError("energy_shares: total energy is zero");
  for (double& v : totals) v /= grand;
  return totals;
}

inline double peak_memory_mb() {
#if defined(__unix__) || defined(__APPLE__)
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) == 0) {
#if defined(__APPLE__)
    return static_cast<double>(usage.ru_maxrss) / (1024.0 * 1024.0);
#else
    return static_cast<double>(usage.ru_maxrss) / 1024.0;
#endif
  }
#endif
  return 0.0;
}

inline EvaluationReport evaluate(const GroundTruth& truth, const DisaggregationResult& result,
                                 const ApplianceCatalog& catalog) {
  EvaluationReport report;
  report.eda = eda(truth, result, catalog);
  report.spa = spa(truth.states, result.states);
  report.shares_true = energy_shares(truth.per_appliance_power);
  report.shares_estimated = energy_shares(
      result.estimated_power.empty() ? estimate_power(result.states, catalog) : result.estimated_power);
  report.runtime_s = result.runtime_s;
  report.peak_memory_estimate_mb = peak_memory_mb();
  return report;
}

inline const std::vector<double>& default_rho_grid() {
  static const std::vector<double> grid{0.8, 0.9, 1.0, 1.1, 1.2};
  return grid;
}

/// Runs the pipeline with every deviation replaced by ρ·Θ and evaluates each
/// run against the same truth.
inline std::vector<std::pair<double, EvaluationReport>> robustness_sweep(
    const AggregateTrace& trace, const ApplianceCatalog& catalog, const GroundTruth& truth,
    const std::vector<double>& rhos, const DisaggregationOptions& options = {}) {
  for (double rho : rhos) {
    if (!(rho > 0.0)) throw ValidationError("robustness_sweep: every rho must be > 0");
  }
  std::vector<std::pair<double, EvaluationReport>> out;
  out.reserve(rhos.size());
  for (double rho : rhos) {
    const ApplianceCatalog scaled = rho == 1.0 ? catalog : catalog.with_scaled_deviation(rho);
    const DisaggregationResult result = disaggregate(trace, scaled, options);
    out.emplace_back(rho, evaluate(truth, result, catalog));
  }
  return out;
}

}  // namespace sser
