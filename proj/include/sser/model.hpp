#pragma once

// Domain types for switching-event recovery: appliance power patterns, the
// binary state matrix of virtual appliances, its temporal event matrix and the
// per-sample power interval test.
//
// Every mode of a physical appliance is one "virtual appliance", i.e. one row
// of the state matrix. Rows of one appliance are contiguous and at most one of
// them may be on at any time.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sser/errors.hpp"

namespace sser {

/// Absolute tolerance, in watts, applied to every interval comparison.
inline constexpr double kPowerTolerance = 1e-6;

/// Upper bound on virtual-appliance rows (one state column is a 64-bit mask).
inline constexpr std::size_t kMaxVirtualRows = 64;

/// (stand-by, rated, deviation) of one virtual appliance.
struct PowerPattern {
  double standby_w = 0.0;
  double rated_w = 0.0;
  double deviation_w = 0.0;

  friend bool operator==(const PowerPattern&, const PowerPattern&) = default;
};

struct ModeSpec {
  double rated_w = 0.0;
  double deviation_w = 0.0;

  friend bool operator==(const ModeSpec&, const ModeSpec&) = default;
};

struct Appliance {
  std::string name;
  double standby_w = 0.0;
  std::vector<ModeSpec> modes;

  friend bool operator==(const Appliance&, const Appliance&) = default;
};

/// One column of the state matrix: bit r is the on/off state of row r.
class StateColumn {
 public:
  constexpr StateColumn() = default;
  constexpr explicit StateColumn(std::uint64_t bits) : bits_(bits) {}

  constexpr std::uint64_t bits() const { return bits_; }
  constexpr bool test(std::size_t row) const { return (bits_ >> row) & 1U; }
  constexpr bool none() const { return bits_ == 0; }
  constexpr int count() const { return std::popcount(bits_); }

  constexpr StateColumn with(std::size_t row, bool on) const {
    const std::uint64_t bit = std::uint64_t{1} << row;
    return StateColumn(on ? (bits_ | bit) : (bits_ & ~bit));
  }

  friend constexpr bool operator==(StateColumn, StateColumn) = default;

 private:
  std::uint64_t bits_ = 0;
};

/// Number of switching events between two consecutive columns.
constexpr int hamming(StateColumn a, StateColumn b) {
  return std::popcount(a.bits() ^ b.bits());
}

/// Column order used for all tie-breaking: rows compared top to bottom, 0 < 1.
constexpr bool lex_less(StateColumn a, StateColumn b) {
  const std::uint64_t diff = a.bits() ^ b.bits();
  if (diff == 0) return false;
  const std::uint64_t lowest = diff & (~diff + 1);
  return (a.bits() & lowest) == 0;
}

/// Lexicographic order on column sequences, columns compared left to right.
inline bool lex_less(std::span<const StateColumn> a,
                     std::span<const StateColumn> b) {
  return std::lexicographical_compare(
      a.begin(), a.end(), b.begin(), b.end(),
      [](StateColumn x, StateColumn y) { return lex_less(x, y); });
}

/// Closed power interval [lo, hi] in watts.
struct PowerInterval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const {
    return lo - kPowerTolerance <= x && x <= hi + kPowerTolerance;
  }
};

/// Set of appliances with their modes and derived per-row vectors.
class ApplianceCatalog {
 public:
  struct ModeGroup {
    std::size_t first_row = 0;
    std::size_t row_count = 0;
    std::uint64_t mask = 0;
  };

  ApplianceCatalog() = default;

  /// Validates the appliances and derives the virtual-row layout.
  explicit ApplianceCatalog(std::vector<Appliance> appliances)
      : appliances_(std::move(appliances)) {
    if (appliances_.empty()) {
      throw ValidationError("catalog: appliance list is empty");
    }
    for (std::size_t a = 0; a < appliances_.size(); ++a) {
      const Appliance& app = appliances_[a];
      const std::string where = "catalog: appliance '" + app.name + "'";
      if (app.name.empty()) {
        throw ValidationError("catalog: appliance " + std::to_string(a + 1) +
                              " has an empty name");
      }
      if (app.name.find_first_of(",\"\n\r") != std::string::npos) {
        throw ValidationError(where + ": name must not contain commas, quotes or newlines");
      }
      if (!std::isfinite(app.standby_w) || app.standby_w < 0.0) {
        throw ValidationError(where + ": standby_w must be >= 0");
      }
      if (app.modes.empty()) {
        throw ValidationError(where + ": no modes");
      }
      ModeGroup group{rated_.size(), app.modes.size(), 0};
      for (std::size_t m = 0; m < app.modes.size(); ++m) {
        const ModeSpec& mode = app.modes[m];
        const std::string mode_where = where + " mode " + std::to_string(m + 1);
        if (!std::isfinite(mode.rated_w) || mode.rated_w <= 0.0) {
          throw ValidationError(mode_where + ": rated_w must be > 0");
        }
        if (!std::isfinite(mode.deviation_w) || mode.deviation_w < 0.0) {
          throw ValidationError(mode_where + ": deviation_w must be >= 0");
        }
        if (!(mode.rated_w - mode.deviation_w > app.standby_w)) {
          throw ValidationError(mode_where +
                                ": rated_w - deviation_w must exceed standby_w");
        }
        if (rated_.size() >= kMaxVirtualRows) {
          throw ValidationError("catalog: more than 64 virtual appliances");
        }
        group.mask |= std::uint64_t{1} << rated_.size();
        row_appliance_.push_back(a);
        row_mode_.push_back(m);
        standby_.push_back(app.standby_w);
        rated_.push_back(mode.rated_w);
        deviation_.push_back(mode.deviation_w);
      }
      groups_.push_back(group);
      baseline_w_ += app.standby_w;
    }
    build_options();
  }

  std::size_t appliance_count() const { return appliances_.size(); }
  std::size_t row_count() const { return rated_.size(); }
  const std::vector<Appliance>& appliances() const { return appliances_; }
  const Appliance& appliance(std::size_t a) const { return appliances_.at(a); }

  /// Γⁿ: the contiguous rows holding the modes of appliance `a`.
  const ModeGroup& mode_group(std::size_t a) const { return groups_.at(a); }
  std::size_t appliance_of(std::size_t row) const { return row_appliance_.at(row); }
  std::size_t mode_of(std::size_t row) const { return row_mode_.at(row); }

  PowerPattern pattern(std::size_t row) const {
    return {standby_.at(row), rated_.at(row), deviation_.at(row)};
  }

  /// Per-row vectors I, P and Θ.
  std::span<const double> standby() const { return standby_; }
  std::span<const double> rated() const { return rated_; }
  std::span<const double> deviation() const { return deviation_; }

  /// P₀: stand-by summed once per physical appliance.
  double baseline_w() const { return baseline_w_; }

  std::string row_label(std::size_t row) const {
    return appliances_.at(row_appliance_.at(row)).name + "#" +
           std::to_string(row_mode_.at(row) + 1);
  }

  std::uint64_t row_mask() const {
    return row_count() == 64 ? ~std::uint64_t{0}
                             : (std::uint64_t{1} << row_count()) - 1;
  }

  /// At most one mode per appliance, no stray bits.
  bool satisfies_mode_constraint(StateColumn s) const {
    if ((s.bits() & ~row_mask()) != 0) return false;
    return std::all_of(groups_.begin(), groups_.end(), [&](const ModeGroup& g) {
      return std::popcount(s.bits() & g.mask) <= 1;
    });
  }

  /// Index of the active mode of appliance `a` in `s`, or -1 when all off.
  int active_mode(StateColumn s, std::size_t a) const {
    const ModeGroup& g = groups_.at(a);
    const std::uint64_t bits = s.bits() & g.mask;
    if (bits == 0) return -1;
    return std::countr_zero(bits) - static_cast<int>(g.first_row);
  }

  /// Aggregate power interval implied by state column `s`. Stand-by counts once
  /// for each appliance whose modes are all off.
  PowerInterval bounds(StateColumn s) const {
    PowerInterval out;
    for (std::size_t a = 0; a < groups_.size(); ++a) {
      const int m = active_mode(s, a);
      if (m < 0) {
        out.lo += appliances_[a].standby_w;
        out.hi += appliances_[a].standby_w;
      } else {
        const std::size_t row = groups_[a].first_row + static_cast<std::size_t>(m);
        out.lo += rated_[row] - deviation_[row];
        out.hi += rated_[row] + deviation_[row];
      }
    }
    return out;
  }

  bool is_feasible(double x, StateColumn s) const {
    return satisfies_mode_constraint(s) && bounds(s).contains(x);
  }

  /// Catalog with every deviation multiplied by `factor`.
  ApplianceCatalog with_scaled_deviation(double factor) const {
    if (!(factor > 0.0) || !std::isfinite(factor)) {
      throw ValidationError("deviation scale must be a positive finite number");
    }
    std::vector<Appliance> scaled = appliances_;
    for (Appliance& app : scaled) {
      for (ModeSpec& mode : app.modes) mode.deviation_w *= factor;
    }
    // Widening can push rated - deviation below stand-by; the interval test
    // itself stays well defined, so skip validation of that invariant here.
    ApplianceCatalog out = *this;
    out.appliances_ = std::move(scaled);
    for (std::size_t r = 0; r < out.deviation_.size(); ++r) {
      out.deviation_[r] *= factor;
    }
    out.build_options();
    return out;
  }

  /// Number of columns satisfying the mode constraint: Π (modes + 1).
  double mode_constrained_space_size() const {
    double size = 1.0;
    for (const ModeGroup& g : groups_) size *= static_cast<double>(g.row_count + 1);
    return size;
  }

  /// Per-appliance choices ordered so that a depth-first walk over appliances
  /// yields columns in lex_less order: off first, then the last mode down to
  /// the first.
  struct Option {
    std::uint64_t bits = 0;
    double lo = 0.0;
    double hi = 0.0;
  };
  const std::vector<Option>& options(std::size_t a) const { return options_.at(a); }
  /// Smallest lower bound / largest upper bound reachable from appliance `a` on.
  double suffix_min_lo(std::size_t a) const { return suffix_min_lo_.at(a); }
  double suffix_max_hi(std::size_t a) const { return suffix_max_hi_.at(a); }

  friend bool operator==(const ApplianceCatalog& l, const ApplianceCatalog& r) {
    return l.appliances_ == r.appliances_;
  }

 private:
  void build_options() {
    options_.assign(groups_.size(), {});
    suffix_min_lo_.assign(groups_.size() + 1, 0.0);
    suffix_max_hi_.assign(groups_.size() + 1, 0.0);
    for (std::size_t a = 0; a < groups_.size(); ++a) {
      const double standby = appliances_[a].standby_w;
      auto& opts = options_[a];
      opts.push_back({0, standby, standby});
      for (std::size_t k = groups_[a].row_count; k-- > 0;) {
        const std::size_t row = groups_[a].first_row + k;
        opts.push_back({std::uint64_t{1} << row, rated_[row] - deviation_[row],
                        rated_[row] + deviation_[row]});
      }
    }
    for (std::size_t a = groups_.size(); a-- > 0;) {
      double min_lo = std::numeric_limits<double>::infinity();
      double max_hi = -std::numeric_limits<double>::infinity();
      for (const Option& o : options_[a]) {
        min_lo = std::min(min_lo, o.lo);
        max_hi = std::max(max_hi, o.hi);
      }
      suffix_min_lo_[a] = suffix_min_lo_[a + 1] + min_lo;
      suffix_max_hi_[a] = suffix_max_hi_[a + 1] + max_hi;
    }
  }

  std::vector<Appliance> appliances_;
  std::vector<ModeGroup> groups_;
  std::vector<std::size_t> row_appliance_;
  std::vector<std::size_t> row_mode_;
  std::vector<double> standby_;
  std::vector<double> rated_;
  std::vector<double> deviation_;
  double baseline_w_ = 0.0;
  std::vector<std::vector<Option>> options_;
  std::vector<double> suffix_min_lo_;
  std::vector<double> suffix_max_hi_;
};

/// Binary N x T matrix of virtual-appliance states.
class StateMatrix {
 public:
  StateMatrix() = default;
  StateMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0) {
    if (rows > kMaxVirtualRows) {
      throw DimensionError("state matrix: more than 64 rows");
    }
  }

  /// Builds a matrix from row vectors; every entry must be exactly 0 or 1.
  static StateMatrix from_rows(const std::vector<std::vector<int>>& rows) {
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    StateMatrix out(rows.size(), cols);
    for (std::size_t n = 0; n < rows.size(); ++n) {
      if (rows[n].size() != cols) {
        throw DimensionError("state matrix: ragged rows");
      }
      for (std::size_t t = 0; t < cols; ++t) {
        const int v = rows[n][t];
        if (v != 0 && v != 1) {
          throw ValidationError("state matrix: entries must be 0 or 1");
        }
        out.set(n, t, v == 1);
      }
    }
    return out;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  bool at(std::size_t n, std::size_t t) const { return data_[n * cols_ + t] != 0; }
  void set(std::size_t n, std::size_t t, bool on) { data_[n * cols_ + t] = on ? 1 : 0; }

  StateColumn column(std::size_t t) const {
    std::uint64_t bits = 0;
    for (std::size_t n = 0; n < rows_; ++n) {
      if (at(n, t)) bits |= std::uint64_t{1} << n;
    }
    return StateColumn(bits);
  }

  void set_column(std::size_t t, StateColumn s) {
    for (std::size_t n = 0; n < rows_; ++n) set(n, t, s.test(n));
  }

  /// True when every column satisfies the catalog's mode-group constraint.
  bool satisfies_mode_constraint(const ApplianceCatalog& catalog) const {
    if (rows_ != catalog.row_count()) return false;
    for (std::size_t t = 0; t < cols_; ++t) {
      if (!catalog.satisfies_mode_constraint(column(t))) return false;
    }
    return true;
  }

  friend bool operator==(const StateMatrix&, const StateMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> data_;
};

/// N x (T-1) matrix with entries in {-1, 0, 1}.
class EventMatrix {
 public:
  EventMatrix() = default;
  EventMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  int at(std::size_t n, std::size_t t) const { return data_[n * cols_ + t]; }
  void set(std::size_t n, std::size_t t, int v) {
    data_[n * cols_ + t] = static_cast<std::int8_t>(v);
  }

  friend bool operator==(const EventMatrix&, const EventMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::int8_t> data_;
};

/// Aggregated power readings at a fixed sampling interval.
struct AggregateTrace {
  std::vector<double> samples;
  double sample_interval_s = 6.0;
  double start_time = 0.0;

  std::size_t size() const { return samples.size(); }
  double time_at(std::size_t index0) const {
    return start_time + sample_interval_s * static_cast<double>(index0);
  }

  void validate() const {
    if (samples.empty()) throw ValidationError("trace: no samples");
    if (!(sample_interval_s > 0.0)) {
      throw ValidationError("trace: sample interval must be > 0");
    }
    for (std::size_t t = 0; t < samples.size(); ++t) {
      if (!std::isfinite(samples[t]) || samples[t] < 0.0) {
        throw ValidationError("trace: sample " + std::to_string(t + 1) +
                              " must be a finite value >= 0");
      }
    }
  }

  friend bool operator==(const AggregateTrace&, const AggregateTrace&) = default;
};

/// ΔS = S·D with D the T x (T-1) temporal difference operator.
inline EventMatrix event_matrix(const StateMatrix& s) {
  if (s.cols() < 2) {
    throw DimensionError("event_matrix: need at least 2 time columns");
  }
  EventMatrix out(s.rows(), s.cols() - 1);
  for (std::size_t n = 0; n < s.rows(); ++n) {
    for (std::size_t t = 0; t + 1 < s.cols(); ++t) {
      out.set(n, t, static_cast<int>(s.at(n, t + 1)) - static_cast<int>(s.at(n, t)));
    }
  }
  return out;
}

/// Σ |ΔS|: the number of switching events.
inline std::size_t total_variation(const EventMatrix& e) {
  std::size_t tv = 0;
  for (std::size_t n = 0; n < e.rows(); ++n) {
    for (std::size_t t = 0; t < e.cols(); ++t) {
      tv += static_cast<std::size_t>(e.at(n, t) < 0 ? -e.at(n, t) : e.at(n, t));
    }
  }
  return tv;
}

/// TV of a state matrix; a single-column matrix has no events.
inline std::size_t total_variation(const StateMatrix& s) {
  std::size_t tv = 0;
  for (std::size_t t = 1; t < s.cols(); ++t) {
    tv += static_cast<std::size_t>(hamming(s.column(t - 1), s.column(t)));
  }
  return tv;
}

/// Every mode-constrained column whose power interval contains `x`, in
/// lex_less order. An empty result marks an infeasible reading.
inline std::vector<StateColumn> feasible_states_at(double x,
                                                   const ApplianceCatalog& catalog) {
  std::vector<StateColumn> out;
  const std::size_t n_apps = catalog.appliance_count();
  if (n_apps == 0) return out;
  const double x_hi = x + kPowerTolerance;
  const double x_lo = x - kPowerTolerance;

  struct Frame {
    std::size_t appliance;
    std::size_t option;
    std::uint64_t bits;
    double lo;
    double hi;
  };
  std::vector<Frame> stack;
  stack.reserve(n_apps + 1);
  stack.push_back({0, 0, 0, 0.0, 0.0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    const auto& opts = catalog.options(f.appliance);
    if (f.option == opts.size()) {
      stack.pop_back();
      continue;
    }
    const auto& o = opts[f.option++];
    const std::uint64_t bits = f.bits | o.bits;
    const double lo = f.lo + o.lo;
    const double hi = f.hi + o.hi;
    const std::size_t next = f.appliance + 1;
    if (lo + catalog.suffix_min_lo(next) > x_hi) continue;
    if (hi + catalog.suffix_max_hi(next) < x_lo) continue;
    if (next == n_apps) {
      out.emplace_back(bits);
    } else {
      stack.push_back({next, 0, bits, lo, hi});
    }
  }
  return out;
}

/// Every mode-constrained column, in lex_less order. Throws ResourceError when
/// the space holds more than `limit` columns.
inline std::vector<StateColumn> mode_constrained_columns(const ApplianceCatalog& catalog,
                                                         std::size_t limit) {
  if (catalog.mode_constrained_space_size() > static_cast<double>(limit)) {
    throw ResourceError("mode-constrained state space exceeds enumeration limit", 0);
  }
  std::vector<StateColumn> out{StateColumn{}};
  for (std::size_t a = 0; a < catalog.appliance_count(); ++a) {
    std::vector<StateColumn> next;
    next.reserve(out.size() * catalog.options(a).size());
    for (StateColumn prefix : out) {
      for (const auto& o : catalog.options(a)) {
        next.emplace_back(prefix.bits() | o.bits);
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace sser
