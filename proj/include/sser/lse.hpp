#pragma once

// Least-squares baseline: per sample, the mode-constrained column whose summed
// rated power sᵀP is closest to the reading. Stand-by power is not part of the
// fit and there is neither an interval constraint nor a TV term. Because the
// squared residual is a sum of independent per-column terms, solving each
// column on its own gives the joint minimiser.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include "sser/model.hpp"
#include "sser/ploa.hpp"

namespace sser {

struct LseOptions {
  /// Largest mode-constrained state space that will be tabulated.
  std::size_t max_states = std::size_t{1} << 24;
};

/// Sorted table of sᵀP over all mode-constrained columns, with the
/// lex-smallest column kept for every distinct sum.
class RatedSumTable {
 public:
  RatedSumTable(const ApplianceCatalog& catalog, std::size_t max_states) {
    const std::vector<StateColumn> columns = mode_constrained_columns(catalog, max_states);
    std::vector<Entry> all;
    all.reserve(columns.size());
    for (StateColumn s : columns) {
      double sum = 0.0;
      for (std::size_t r = 0; r < catalog.row_count(); ++r) {
        if (s.test(r)) sum += catalog.rated()[r];
      }
      all.push_back({sum, s});
    }
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) {
      if (a.sum != b.sum) return a.sum < b.sum;
      return lex_less(a.state, b.state);
    });
    for (const Entry& e : all) {
      if (entries_.empty() || entries_.back().sum != e.sum) entries_.push_back(e);
    }
  }

  /// Minimiser of |x - sᵀP|; ties go to the lex-smallest column.
  StateColumn nearest(double x) const {
    const auto it = std::lower_bound(entries_.begin(), entries_.end(), x,
                                     [](const Entry& e, double v) { return e.sum < v; });
    const Entry* best = nullptr;
    const auto consider = [&](const Entry& e) {
      if (best == nullptr) {
        best = &e;
        return;
      }
      const double d = std::abs(x - e.sum);
      const double d_best = std::abs(x - best->sum);
      if (d < d_best || (d == d_best && lex_less(e.state, best->state))) best = &e;
    };
    if (it != entries_.end()) consider(*it);
    if (it != entries_.begin()) consider(*(it - 1));
    return best->state;
  }

 private:
  struct Entry {
    double sum;
    StateColumn state;
  };
  std::vector<Entry> entries_;
};

inline DisaggregationResult solve_lse(const AggregateTrace& trace, const ApplianceCatalog& catalog,
                                      const LseOptions& options = {}) {
  const auto started = std::chrono::steady_clock::now();
  trace.validate();
  const RatedSumTable table(catalog, options.max_states);
  DisaggregationResult result;
  result.method = "lse";
  result.baseline_w = catalog.baseline_w();
  result.states = StateMatrix(catalog.row_count(), trace.size());
  for (std::size_t t = 0; t < trace.size(); ++t) {
    result.states.set_column(t, table.nearest(trace.samples[t]));
  }
  finalize_result(result, trace, catalog);
  result.epoch_tv_sum = result.total_tv;
  result.runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace sser
