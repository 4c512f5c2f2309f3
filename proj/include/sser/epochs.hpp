#pragma once

// Active-epoch detection: windows where the aggregate rises above the
// baseline power. Time indices in this header are 1-based, matching the
// epoch CSV format.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "sser/model.hpp"

namespace sser {

/// Closed window [start, end] of 1-based time indices.
struct ActiveEpoch {
  std::size_t start = 1;
  std::size_t end = 1;

  std::size_t length() const { return end - start + 1; }
  bool contains(std::size_t t) const { return start <= t && t <= end; }

  friend bool operator==(const ActiveEpoch&, const ActiveEpoch&) = default;
};

/// Scans the trace once. From each t the window is extended while the reading
/// at its end is strictly above `baseline_w` and the end has not reached T; it
/// is kept only when it grew past its start. The recorded end is therefore
/// the first index at or below baseline, or T.
inline std::vector<ActiveEpoch> detect_active_epochs(const AggregateTrace& trace,
                                                     double baseline_w) {
  std::vector<ActiveEpoch> epochs;
  const std::vector<double>& x = trace.samples;
  const std::size_t T = x.size();
  std::size_t t = 1;
  while (t <= T) {
    const std::size_t start = t;
    std::size_t end = t;
    while (x[end - 1] > baseline_w && end < T) ++end;
    if (end > start) epochs.push_back({start, end});
    t = end + 1;
  }
  return epochs;
}

/// Time indices in [1, T] not covered by any epoch, ascending.
inline std::vector<std::size_t> coverage_complement(const std::vector<ActiveEpoch>& epochs,
                                                    std::size_t T) {
  std::vector<std::size_t> out;
  std::size_t next = 1;
  for (const ActiveEpoch& w : epochs) {
    for (; next < w.start && next <= T; ++next) out.push_back(next);
    next = std::max(next, w.end + 1);
  }
  for (; next <= T; ++next) out.push_back(next);
  return out;
}

/// Largest reading inside an epoch.
inline double epoch_peak(const AggregateTrace& trace, const ActiveEpoch& w) {
  const auto first = trace.samples.begin() + static_cast<std::ptrdiff_t>(w.start - 1);
  const auto last = trace.samples.begin() + static_cast<std::ptrdiff_t>(w.end);
  return *std::max_element(first, last);
}

}  // namespace sser
