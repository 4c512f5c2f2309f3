#pragma once

// Synthetic traces with known ground truth. Switching activity is confined to
// randomly placed, disjoint windows separated by stand-by samples; inside a
// window each "event" is one on/off pulse of a randomly chosen appliance mode.
// Readings of an active mode are drawn within its deviation band, so the true
// state is always feasible for its own trace.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sser/epochs.hpp"
#include "sser/metrics.hpp"
#include "sser/model.hpp"
#include "sser/solver.hpp"

namespace sser {

enum class NoiseRule { none, uniform };

inline std::string to_string(NoiseRule n) { return n == NoiseRule::none ? "none" : "uniform"; }

inline NoiseRule parse_noise_rule(const std::string& s) {
  if (s == "none") return NoiseRule::none;
  if (s == "uniform") return NoiseRule::uniform;
  throw ValidationError("unknown noise rule '" + s + "' (expected none|uniform)");
}

struct ScenarioSpec {
  std::size_t duration = 14400;
  std::size_t epoch_count = 12;
  std::size_t epoch_length_mean = 40;
  std::size_t epoch_length_max = 60;
  /// On/off pulses per epoch; each pulse contributes two switching events.
  std::size_t events_per_epoch = 2;
  NoiseRule noise = NoiseRule::uniform;
  std::uint64_t seed = 1;
  /// Restricts windows so that brute force can check each one.
  bool oracle_checkable = false;
  double sample_interval_s = 6.0;
  double start_time = 0.0;
};

struct Scenario {
  AggregateTrace trace;
  GroundTruth truth;
  /// Windows in which activity was placed (1-based, inclusive).
  std::vector<ActiveEpoch> placed_windows;
};

namespace detail {

/// Distribution helpers over raw engine output, so a seed gives the same
/// scenario with every standard library.
class ScenarioRng {
 public:
  explicit ScenarioRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [lo, hi].
  std::size_t between(std::size_t lo, std::size_t hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<std::size_t>(engine_() % (hi - lo + 1));
  }

  /// Uniform real in [-1, 1].
  double symmetric() {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return 2.0 * u - 1.0;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace detail

inline void validate_spec(const ScenarioSpec& spec, const ApplianceCatalog& catalog) {
  if (spec.duration < 1) throw ValidationError("scenario: duration must be >= 1");
  if (!(spec.sample_interval_s > 0.0)) throw ValidationError("scenario: sample interval must be > 0");
  if (spec.epoch_count > 0) {
    if (spec.epoch_length_max < 2) throw ValidationError("scenario: epoch_length_max must be >= 2");
    if (spec.epoch_length_mean < 2 || spec.epoch_length_mean > spec.epoch_length_max) {
      throw ValidationError("scenario: epoch_length_mean must lie in [2, epoch_length_max]");
    }
  }
  if (spec.oracle_checkable &&
      spec.epoch_length_max * catalog.row_count() > kBruteForceMaxBits) {
    throw ValidationError("scenario: oracle_checkable needs epoch_length_max * rows <= " +
                          std::to_string(kBruteForceMaxBits));
  }
}

inline Scenario generate(const ApplianceCatalog& catalog, const ScenarioSpec& spec) {
  validate_spec(spec, catalog);
  detail::ScenarioRng rng(spec.seed);
  const std::size_t T = spec.duration;
  const std::size_t k = spec.epoch_count;

  // Window lengths spread symmetrically around the mean, capped at the max.
  std::vector<std::size_t> lengths(k);
  const std::size_t spread = std::min(spec.epoch_length_mean - 2,
                                      spec.epoch_length_max - spec.epoch_length_mean);
  for (std::size_t& len : lengths) {
    len = rng.between(spec.epoch_length_mean - spread, spec.epoch_length_mean + spread);
  }
  std::size_t required = k + 1;
  for (std::size_t len : lengths) required += len;
  if (required > T) {
    throw ValidationError("scenario: " + std::to_string(k) + " epochs with stand-by gaps need " +
                          std::to_string(required) + " samples, duration is " +
                          std::to_string(T));
  }

  // Distribute the free samples over the k + 1 gaps (each gap keeps >= 1).
  const std::size_t free = T - required;
  std::vector<std::size_t> cuts(k);
  for (std::size_t& c : cuts) c = rng.between(0, free);
  std::sort(cuts.begin(), cuts.end());

  Scenario out;
  std::size_t cursor = 0;  // 0-based
  std::size_t prev_cut = 0;
  for (std::size_t e = 0; e < k; ++e) {
    cursor += 1 + (cuts[e] - prev_cut);
    prev_cut = cuts[e];
    out.placed_windows.push_back({cursor + 1, cursor + lengths[e]});
    cursor += lengths[e];
  }

  // Mode index per appliance and sample; -1 is stand-by.
  const std::size_t A = catalog.appliance_count();
  std::vector<std::vector<int>> mode(A, std::vector<int>(T, -1));
  for (const ActiveEpoch& w : out.placed_windows) {
    const std::size_t first = w.start - 1;
    const std::size_t len = w.length();
    for (std::size_t ev = 0; ev < spec.events_per_epoch; ++ev) {
      for (int attempt = 0; attempt < 32; ++attempt) {
        const std::size_t a = rng.between(0, A - 1);
        const std::size_t m = rng.between(0, catalog.mode_group(a).row_count - 1);
        const std::size_t dur = rng.between(1, len - 1);
        const std::size_t on = first + rng.between(0, len - 1 - dur);
        const auto begin = mode[a].begin() + static_cast<std::ptrdiff_t>(on);
        const auto end = begin + static_cast<std::ptrdiff_t>(dur);
        if (std::any_of(begin, end, [](int v) { return v >= 0; })) continue;
        std::fill(begin, end, static_cast<int>(m));
        break;
      }
    }
  }

  out.trace.sample_interval_s = spec.sample_interval_s;
  out.trace.start_time = spec.start_time;
  out.trace.samples.assign(T, 0.0);
  out.truth.states = StateMatrix(catalog.row_count(), T);
  out.truth.per_appliance_power.assign(A, std::vector<double>(T, 0.0));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t a = 0; a < A; ++a) {
      double w = catalog.appliance(a).standby_w;
      if (mode[a][t] >= 0) {
        const std::size_t row = catalog.mode_group(a).first_row + static_cast<std::size_t>(mode[a][t]);
        out.truth.states.set(row, t, true);
        w = catalog.rated()[row];
        if (spec.noise == NoiseRule::uniform) w += catalog.deviation()[row] * rng.symmetric();
      }
      out.truth.per_appliance_power[a][t] = w;
      out.trace.samples[t] += w;
    }
  }
  return out;
}

}  // namespace sser
