#pragma once

// Exact solver for the per-epoch subproblem: choose one feasible state column
// per sample so that the number of switching events (the total variation of
// the window, including the entry transition from the boundary state) is
// minimal.
//
// The objective is a chain of Hamming costs between consecutive columns, so
// the search is organised as a shortest path through layers of per-column
// feasible states. A backward pass computes the exact cost-to-go of every
// candidate, plus how many optimal completions it has (saturating at 2); a
// forward pass then picks, column by column, the lex-smallest candidate that
// stays on an optimal path. That gives the optimum, the lexicographic
// tie-break and the uniqueness flag in one sweep.
//
// One backward step maps the cost-to-go of layer t+1 onto layer t. Two exact
// routes exist for it:
//   pairwise  every (s, s') pair, |L_t|·|L_{t+1}| work;
//   lattice   a min-plus distance transform over the full mode-constrained
//             state space, one appliance at a time. Hamming distance between
//             columns is a sum of per-appliance distances (0 same mode, 1 on/off,
//             2 mode change), so the transform separates by appliance.
// The cheaper route is chosen per step unless forced through SolverOptions.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "sser/epochs.hpp"
#include "sser/model.hpp"

namespace sser {

struct SlackPolicy {
  enum class Kind { strict, widen };

  Kind kind = Kind::strict;
  double factor = 1.0;

  static SlackPolicy strict() { return {}; }
  static SlackPolicy widen(double factor) {
    if (!(factor >= 1.0)) throw ValidationError("widen factor must be >= 1");
    return {Kind::widen, factor};
  }

  std::string describe() const {
    return kind == Kind::strict ? "strict" : "widen(" + std::to_string(factor) + ")";
  }

  friend bool operator==(const SlackPolicy&, const SlackPolicy&) = default;
};

struct EpochProblem {
  ActiveEpoch window;
  std::vector<double> x_window;
  std::shared_ptr<const ApplianceCatalog> catalog;
  /// Column assumed immediately before the window.
  StateColumn boundary_state{};
  /// Multiplier applied to every deviation in the feasibility test only.
  double deviation_scale = 1.0;

  friend bool operator==(const EpochProblem&, const EpochProblem&) = default;
};

/// Builds the subproblem for `window` of `trace` with an all-off boundary.
inline EpochProblem make_epoch_problem(const AggregateTrace& trace, const ActiveEpoch& window,
                                       std::shared_ptr<const ApplianceCatalog> catalog) {
  EpochProblem p;
  p.window = window;
  p.x_window.assign(trace.samples.begin() + static_cast<std::ptrdiff_t>(window.start - 1),
                    trace.samples.begin() + static_cast<std::ptrdiff_t>(window.end));
  p.catalog = std::move(catalog);
  return p;
}

/// Under widen(f) the problem's deviations are scaled by f for feasibility.
inline EpochProblem apply_slack(const EpochProblem& p, const SlackPolicy& policy) {
  if (policy.kind == SlackPolicy::Kind::strict) return p;
  EpochProblem out = p;
  out.deviation_scale = p.deviation_scale * policy.factor;
  return out;
}

enum class TransitionRoute { automatic, pairwise, lattice };

struct SolverOptions {
  /// Maximum number of (column, candidate state) search nodes per epoch.
  std::size_t max_nodes = 10'000'000;
  TransitionRoute route = TransitionRoute::automatic;
  /// Largest state space the lattice route may materialise.
  std::size_t max_lattice_size = std::size_t{1} << 22;
};

struct SearchStats {
  std::size_t nodes_explored = 0;
  std::size_t transition_work = 0;
  std::size_t pairwise_steps = 0;
  std::size_t lattice_steps = 0;
  double wall_time_s = 0.0;
};

struct EpochSolution {
  ActiveEpoch window;
  /// N x (window length) states.
  StateMatrix states;
  std::size_t tv = 0;
  bool unique = true;
  /// 1-based time indices without a feasible state; each carries the previous
  /// column's state.
  std::vector<std::size_t> infeasible_columns;
  SearchStats stats;

  /// Equality of everything except timing statistics.
  bool same_outcome(const EpochSolution& o) const {
    return window == o.window && states == o.states && tv == o.tv && unique == o.unique &&
           infeasible_columns == o.infeasible_columns;
  }
};

/// TV of a window including the transition out of `boundary`.
inline std::size_t window_tv(StateColumn boundary, const StateMatrix& states) {
  if (states.cols() == 0) return 0;
  return static_cast<std::size_t>(hamming(boundary, states.column(0))) +
         total_variation(states);
}

namespace detail {

inline constexpr std::int32_t kUnreachable = std::numeric_limits<std::int32_t>::max() / 4;

inline std::uint8_t add_count(std::uint8_t a, std::uint8_t b) {
  return static_cast<std::uint8_t>(std::min(2, a + b));
}

inline void validate_problem(const EpochProblem& p) {
  if (!p.catalog) throw ValidationError("epoch problem: no catalog");
  if (p.window.end < p.window.start || p.window.start < 1) {
    throw DimensionError("epoch problem: malformed window");
  }
  if (p.x_window.size() != p.window.length()) {
    throw DimensionError("epoch problem: x_window length does not match the window");
  }
  if (!p.catalog->satisfies_mode_constraint(p.boundary_state)) {
    throw ValidationError("epoch problem: boundary state violates the mode constraint");
  }
}

inline std::string window_name(const ActiveEpoch& w) {
  return "[" + std::to_string(w.start) + "," + std::to_string(w.end) + "]";
}

/// Mixed-radix index over per-appliance modes (digit 0 = off).
class ModeLattice {
 public:
  explicit ModeLattice(const ApplianceCatalog& catalog) : catalog_(&catalog) {
    std::size_t stride = 1;
    for (std::size_t a = 0; a < catalog.appliance_count(); ++a) {
      const std::size_t radix = catalog.mode_group(a).row_count + 1;
      radix_.push_back(radix);
      stride_.push_back(stride);
      stride *= radix;
    }
    size_ = stride;
  }

  std::size_t size() const { return size_; }

  /// Work units of one transform.
  double cost() const {
    double per_entry = 0.0;
    for (std::size_t r : radix_) per_entry += static_cast<double>(r * r) / static_cast<double>(r);
    return per_entry * static_cast<double>(size_);
  }

  std::size_t index(StateColumn s) const {
    std::size_t idx = 0;
    for (std::size_t a = 0; a < radix_.size(); ++a) {
      idx += static_cast<std::size_t>(catalog_->active_mode(s, a) + 1) * stride_[a];
    }
    return idx;
  }

  /// In place: val[s] <- min over s' (val[s'] + hamming(s, s')), with counts of
  /// minimisers summed (saturating at 2).
  void transform(std::vector<std::int32_t>& val, std::vector<std::uint8_t>& cnt) const {
    std::vector<std::int32_t> line_val;
    std::vector<std::uint8_t> line_cnt;
    for (std::size_t a = 0; a < radix_.size(); ++a) {
      const std::size_t radix = radix_[a];
      const std::size_t stride = stride_[a];
      const std::size_t block = radix * stride;
      line_val.resize(radix);
      line_cnt.resize(radix);
      for (std::size_t outer = 0; outer < size_; outer += block) {
        for (std::size_t inner = 0; inner < stride; ++inner) {
          const std::size_t base = outer + inner;
          for (std::size_t i = 0; i < radix; ++i) {
            line_val[i] = val[base + i * stride];
            line_cnt[i] = cnt[base + i * stride];
          }
          for (std::size_t i = 0; i < radix; ++i) {
            std::int32_t best = line_val[i];
            std::uint8_t count = best >= kUnreachable ? 0 : line_cnt[i];
            for (std::size_t u = 0; u < radix; ++u) {
              if (u == i || line_val[u] >= kUnreachable) continue;
              const std::int32_t d = (u == 0 || i == 0) ? 1 : 2;
              const std::int32_t c = line_val[u] + d;
              if (c < best) {
                best = c;
                count = line_cnt[u];
              } else if (c == best) {
                count = add_count(count, line_cnt[u]);
              }
            }
            val[base + i * stride] = best;
            cnt[base + i * stride] = count;
          }
        }
      }
    }
  }

 private:
  const ApplianceCatalog* catalog_;
  std::vector<std::size_t> radix_;
  std::vector<std::size_t> stride_;
  std::size_t size_ = 1;
};

}  // namespace detail

/// Exact minimum-TV assignment for one epoch. Columns with no feasible state
/// carry the previous column's state and are listed in infeasible_columns;
/// if every column is infeasible an InfeasibleError is raised.
inline EpochSolution solve_epoch(const EpochProblem& p, const SolverOptions& options = {}) {
  const auto started = std::chrono::steady_clock::now();
  detail::validate_problem(p);
  const ApplianceCatalog feasibility =
      p.deviation_scale == 1.0 ? *p.catalog : p.catalog->with_scaled_deviation(p.deviation_scale);
  const std::size_t L = p.x_window.size();

  EpochSolution sol;
  sol.window = p.window;

  struct Layer {
    std::vector<StateColumn> states;
    bool carried = false;
    std::vector<std::int32_t> togo;
    std::vector<std::uint8_t> count;
  };
  std::vector<Layer> layers(L);
  for (std::size_t j = 0; j < L; ++j) {
    Layer& layer = layers[j];
    layer.states = feasible_states_at(p.x_window[j], feasibility);
    if (layer.states.empty()) {
      layer.carried = true;
      layer.states = j == 0 ? std::vector<StateColumn>{p.boundary_state} : layers[j - 1].states;
      sol.infeasible_columns.push_back(p.window.start + j);
    }
    sol.stats.nodes_explored += layer.states.size();
    if (sol.stats.nodes_explored > options.max_nodes) {
      throw ResourceError("epoch " + detail::window_name(p.window) + ": search budget of " +
                              std::to_string(options.max_nodes) + " nodes exceeded",
                          sol.stats.nodes_explored);
    }
  }
  if (sol.infeasible_columns.size() == L) {
    throw InfeasibleError("epoch " + detail::window_name(p.window) +
                              ": no feasible state in any column (first: t=" +
                              std::to_string(p.window.start) + ")",
                          p.window.start);
  }

  std::unique_ptr<detail::ModeLattice> lattice;
  std::vector<std::int32_t> dense_val;
  std::vector<std::uint8_t> dense_cnt;

  layers[L - 1].togo.assign(layers[L - 1].states.size(), 0);
  layers[L - 1].count.assign(layers[L - 1].states.size(), 1);
  for (std::size_t j = L - 1; j-- > 0;) {
    Layer& cur = layers[j];
    const Layer& nxt = layers[j + 1];
    if (nxt.carried) {
      cur.togo = nxt.togo;
      cur.count = nxt.count;
      continue;
    }
    cur.togo.assign(cur.states.size(), detail::kUnreachable);
    cur.count.assign(cur.states.size(), 0);

    const double pairwise_cost =
        static_cast<double>(cur.states.size()) * static_cast<double>(nxt.states.size());
    bool use_lattice = false;
    if (options.route != TransitionRoute::pairwise &&
        feasibility.mode_constrained_space_size() <= static_cast<double>(options.max_lattice_size)) {
      if (!lattice) lattice = std::make_unique<detail::ModeLattice>(feasibility);
      use_lattice = options.route == TransitionRoute::lattice || lattice->cost() < pairwise_cost;
    }

    if (use_lattice) {
      dense_val.assign(lattice->size(), detail::kUnreachable);
      dense_cnt.assign(lattice->size(), 0);
      for (std::size_t k = 0; k < nxt.states.size(); ++k) {
        const std::size_t idx = lattice->index(nxt.states[k]);
        dense_val[idx] = nxt.togo[k];
        dense_cnt[idx] = nxt.count[k];
      }
      lattice->transform(dense_val, dense_cnt);
      for (std::size_t k = 0; k < cur.states.size(); ++k) {
        const std::size_t idx = lattice->index(cur.states[k]);
        cur.togo[k] = dense_val[idx];
        cur.count[k] = dense_cnt[idx];
      }
      sol.stats.transition_work += static_cast<std::size_t>(lattice->cost());
      ++sol.stats.lattice_steps;
    } else {
      for (std::size_t k = 0; k < cur.states.size(); ++k) {
        std::int32_t best = detail::kUnreachable;
        std::uint8_t count = 0;
        for (std::size_t q = 0; q < nxt.states.size(); ++q) {
          const std::int32_t c = hamming(cur.states[k], nxt.states[q]) + nxt.togo[q];
          if (c < best) {
            best = c;
            count = nxt.count[q];
          } else if (c == best) {
            count = detail::add_count(count, nxt.count[q]);
          }
        }
        cur.togo[k] = best;
        cur.count[k] = count;
      }
      sol.stats.transition_work += static_cast<std::size_t>(pairwise_cost);
      ++sol.stats.pairwise_steps;
    }
  }

  // Entry from the boundary state.
  std::int32_t best = detail::kUnreachable;
  std::uint8_t optimal_paths = 0;
  const Layer& first = layers[0];
  for (std::size_t k = 0; k < first.states.size(); ++k) {
    const std::int32_t c = hamming(p.boundary_state, first.states[k]) + first.togo[k];
    if (c < best) {
      best = c;
      optimal_paths = first.count[k];
    } else if (c == best) {
      optimal_paths = detail::add_count(optimal_paths, first.count[k]);
    }
  }

  // Forward extraction of the lex-smallest optimal sequence. Layers are sorted
  // by lex_less, so the first candidate on an optimal path is the smallest.
  sol.states = StateMatrix(p.catalog->row_count(), L);
  StateColumn prev = p.boundary_state;
  std::int32_t remaining = best;
  std::size_t prev_idx = 0;
  for (std::size_t j = 0; j < L; ++j) {
    const Layer& layer = layers[j];
    std::size_t pick = 0;
    if (layer.carried) {
      pick = j == 0 ? 0 : prev_idx;
    } else {
      for (pick = 0; pick < layer.states.size(); ++pick) {
        if (hamming(prev, layer.states[pick]) + layer.togo[pick] == remaining) break;
      }
    }
    remaining -= hamming(prev, layer.states[pick]);
    prev = layer.states[pick];
    prev_idx = pick;
    sol.states.set_column(j, prev);
  }

  sol.tv = static_cast<std::size_t>(best);
  sol.unique = optimal_paths == 1;
  sol.stats.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return sol;
}

/// Cap on N·(window length) accepted by brute_force_epoch.
inline constexpr std::size_t kBruteForceMaxBits = 24;

/// Exhaustive enumeration of every mode-constrained assignment of the window,
/// in lexicographic order. Applies the same carry rule as solve_epoch to
/// columns where no state fits. `stats.nodes_explored` is the number of
/// assignments covered, (mode-constrained columns)^(window length).
inline EpochSolution brute_force_epoch(const EpochProblem& p) {
  const auto started = std::chrono::steady_clock::now();
  detail::validate_problem(p);
  const ApplianceCatalog& catalog = *p.catalog;
  const std::size_t N = catalog.row_count();
  const std::size_t L = p.x_window.size();
  if (N * L > kBruteForceMaxBits) {
    throw ResourceError("brute force: N * window length exceeds " +
                            std::to_string(kBruteForceMaxBits),
                        0);
  }

  // All columns with at most one mode per appliance, in lex order, built by
  // a plain odometer over row bits.
  std::vector<StateColumn> columns;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << N); ++bits) {
    StateColumn s(bits);
    if (catalog.satisfies_mode_constraint(s)) columns.push_back(s);
  }
  std::sort(columns.begin(), columns.end(),
            [](StateColumn a, StateColumn b) { return lex_less(a, b); });

  // Interval test written out directly: (1 - s)ᵀI once per idle appliance,
  // plus sᵀ(P ± Θ) over active rows.
  const auto in_interval = [&](double x, StateColumn s) {
    double lo = 0.0;
    double hi = 0.0;
    for (std::size_t a = 0; a < catalog.appliance_count(); ++a) {
      const auto& g = catalog.mode_group(a);
      bool any_on = false;
      for (std::size_t r = g.first_row; r < g.first_row + g.row_count; ++r) {
        if (!s.test(r)) continue;
        any_on = true;
        const double dev = catalog.deviation()[r] * p.deviation_scale;
        lo += catalog.rated()[r] - dev;
        hi += catalog.rated()[r] + dev;
      }
      if (!any_on) {
        lo += catalog.appliance(a).standby_w;
        hi += catalog.appliance(a).standby_w;
      }
    }
    return lo - kPowerTolerance <= x && x <= hi + kPowerTolerance;
  };

  std::vector<std::vector<bool>> ok(L, std::vector<bool>(columns.size(), false));
  std::vector<bool> carried(L, false);
  EpochSolution sol;
  sol.window = p.window;
  for (std::size_t j = 0; j < L; ++j) {
    bool any = false;
    for (std::size_t k = 0; k < columns.size(); ++k) {
      ok[j][k] = in_interval(p.x_window[j], columns[k]);
      any = any || ok[j][k];
    }
    if (!any) {
      carried[j] = true;
      sol.infeasible_columns.push_back(p.window.start + j);
    }
  }
  if (sol.infeasible_columns.size() == L) {
    throw InfeasibleError("brute force: no feasible state in any column", p.window.start);
  }

  std::size_t best = std::numeric_limits<std::size_t>::max();
  std::size_t optima = 0;
  std::vector<StateColumn> current(L);
  std::vector<StateColumn> best_seq;

  // Depth-first odometer: column 0 is the most significant digit and each
  // digit runs in lex order, so the first optimum met is the lex-smallest.
  const auto recurse = [&](auto&& self, std::size_t j, StateColumn prev, std::size_t cost) -> void {
    if (j == L) {
      if (cost < best) {
        best = cost;
        optima = 1;
        best_seq = current;
      } else if (cost == best) {
        ++optima;
      }
      return;
    }
    if (carried[j]) {
      current[j] = prev;
      self(self, j + 1, prev, cost);
      return;
    }
    for (std::size_t k = 0; k < columns.size(); ++k) {
      if (!ok[j][k]) continue;
      current[j] = columns[k];
      self(self, j + 1, columns[k], cost + static_cast<std::size_t>(hamming(prev, columns[k])));
    }
  };
  recurse(recurse, 0, p.boundary_state, 0);

  sol.states = StateMatrix(N, L);
  for (std::size_t j = 0; j < L; ++j) sol.states.set_column(j, best_seq[j]);
  sol.tv = best;
  sol.unique = optima == 1;
  double assignments = 1.0;
  for (std::size_t j = 0; j < L; ++j) assignments *= static_cast<double>(columns.size());
  sol.stats.nodes_explored = static_cast<std::size_t>(assignments);
  sol.stats.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return sol;
}

}  // namespace sser
