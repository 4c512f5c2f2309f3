#pragma once

// Shared fixtures and reference implementations for the tests. The
// references work on plain vectors and the raw appliance list so that they
// share no code path with the library routines they check.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sser/sser.hpp"

namespace sser::testing {

inline std::filesystem::path data_dir() { return SSER_TEST_DATA_DIR; }

inline ApplianceCatalog table2_catalog() { return load_catalog(data_dir() / "table2_catalog.json"); }

inline ApplianceCatalog single_mode_catalog(const std::vector<ModeSpec>& modes,
                                            const std::vector<double>& standby = {}) {
  std::vector<Appliance> apps;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    apps.push_back({"a" + std::to_string(i + 1), standby.empty() ? 0.0 : standby[i], {modes[i]}});
  }
  return ApplianceCatalog(std::move(apps));
}

/// Random catalog with at most `max_rows` virtual rows and integer powers.
inline ApplianceCatalog random_catalog(std::mt19937_64& rng, std::size_t max_rows,
                                       bool allow_multi_mode = true) {
  std::uniform_int_distribution<int> rated(5, 120);
  std::uniform_int_distribution<int> standby(0, 3);
  std::vector<Appliance> apps;
  std::size_t rows = 0;
  const std::size_t target = std::uniform_int_distribution<std::size_t>(1, max_rows)(rng);
  while (rows < target) {
    Appliance app;
    app.name = "dev" + std::to_string(apps.size() + 1);
    app.standby_w = standby(rng);
    std::size_t modes = 1;
    if (allow_multi_mode && target - rows >= 2) {
      modes = std::uniform_int_distribution<std::size_t>(1, std::min<std::size_t>(3, target - rows))(rng);
    }
    for (std::size_t m = 0; m < modes; ++m) {
      const double p = rated(rng);
      const double max_dev = std::max(0.0, std::floor(p - app.standby_w - 1.0));
      const double dev = std::uniform_int_distribution<int>(0, static_cast<int>(std::min(15.0, max_dev)))(rng);
      app.modes.push_back({p, dev});
    }
    rows += modes;
    apps.push_back(std::move(app));
  }
  return ApplianceCatalog(std::move(apps));
}

/// A state column as a vector of 0/1 entries, row 0 first.
using Column = std::vector<int>;

/// Every assignment of at most one mode per appliance, from the appliance list.
inline std::vector<Column> all_mode_columns(const std::vector<Appliance>& apps) {
  std::size_t rows = 0;
  for (const Appliance& a : apps) rows += a.modes.size();
  std::vector<Column> out;
  std::vector<std::size_t> choice(apps.size(), 0);  // 0 = off, k = mode k
  while (true) {
    Column c(rows, 0);
    std::size_t r = 0;
    for (std::size_t a = 0; a < apps.size(); ++a) {
      if (choice[a] > 0) c[r + choice[a] - 1] = 1;
      r += apps[a].modes.size();
    }
    out.push_back(c);
    std::size_t a = 0;
    while (a < apps.size() && ++choice[a] > apps[a].modes.size()) choice[a++] = 0;
    if (a == apps.size()) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Interval test computed straight from the appliance list.
inline bool column_fits(const std::vector<Appliance>& apps, const Column& c, double x,
                        double deviation_scale = 1.0) {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t r = 0;
  for (const Appliance& a : apps) {
    bool on = false;
    for (const ModeSpec& m : a.modes) {
      if (c[r++]) {
        on = true;
        lo += m.rated_w - deviation_scale * m.deviation_w;
        hi += m.rated_w + deviation_scale * m.deviation_w;
      }
    }
    if (!on) {
      lo += a.standby_w;
      hi += a.standby_w;
    }
  }
  return lo - 1e-6 <= x && x <= hi + 1e-6;
}

inline Column to_column(StateColumn s, std::size_t rows) {
  Column c(rows);
  for (std::size_t r = 0; r < rows; ++r) c[r] = s.test(r) ? 1 : 0;
  return c;
}

inline int distance(const Column& a, const Column& b) {
  int d = 0;
  for (std::size_t r = 0; r < a.size(); ++r) d += a[r] != b[r];
  return d;
}

/// Reference optimum of a window: minimum TV over all sequences of fitting
/// columns, the lex-smallest minimiser and the number of minimisers.
struct ReferenceOptimum {
  std::size_t tv = 0;
  std::vector<Column> states;
  std::size_t minimisers = 0;
};

inline ReferenceOptimum reference_optimum(const std::vector<Appliance>& apps,
                                          const std::vector<double>& x, const Column& boundary,
                                          double deviation_scale = 1.0) {
  const std::vector<Column> cols = all_mode_columns(apps);
  std::vector<std::vector<Column>> layer(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    for (const Column& c : cols) {
      if (column_fits(apps, c, x[j], deviation_scale)) layer[j].push_back(c);
    }
  }
  ReferenceOptimum best;
  best.tv = std::numeric_limits<std::size_t>::max();
  std::vector<Column> seq(x.size());
  // Odometer over per-column choices, first column most significant.
  std::vector<std::size_t> idx(x.size(), 0);
  for (const auto& l : layer) {
    if (l.empty()) return best;  // caller checks minimisers == 0
  }
  while (true) {
    std::size_t tv = 0;
    const Column* prev = &boundary;
    for (std::size_t j = 0; j < x.size(); ++j) {
      seq[j] = layer[j][idx[j]];
      tv += static_cast<std::size_t>(distance(*prev, seq[j]));
      prev = &seq[j];
    }
    if (tv < best.tv) {
      best.tv = tv;
      best.states = seq;
      best.minimisers = 1;
    } else if (tv == best.tv) {
      ++best.minimisers;
      if (seq < best.states) best.states = seq;
    }
    std::size_t j = x.size();
    while (j > 0) {
      --j;
      if (++idx[j] < layer[j].size()) break;
      idx[j] = 0;
      if (j == 0) return best;
    }
    if (x.empty()) return best;
  }
}

inline std::vector<Column> columns_of(const StateMatrix& s) {
  std::vector<Column> out(s.cols(), Column(s.rows()));
  for (std::size_t t = 0; t < s.cols(); ++t) {
    for (std::size_t n = 0; n < s.rows(); ++n) out[t][n] = s.at(n, t) ? 1 : 0;
  }
  return out;
}

/// Trace of column sums for a sequence of states, each active mode drawn
/// inside its band.
inline std::vector<double> trace_for(const std::vector<Appliance>& apps,
                                     const std::vector<Column>& states, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x;
  for (const Column& c : states) {
    double sum = 0.0;
    std::size_t r = 0;
    for (const Appliance& a : apps) {
      bool on = false;
      for (const ModeSpec& m : a.modes) {
        if (c[r++]) {
          on = true;
          sum += m.rated_w + m.deviation_w * u(rng);
        }
      }
      if (!on) sum += a.standby_w;
    }
    x.push_back(sum);
  }
  return x;
}

inline Column random_mode_column(const std::vector<Appliance>& apps, std::mt19937_64& rng,
                                 double on_probability = 0.4) {
  Column c;
  std::bernoulli_distribution on(on_probability);
  for (const Appliance& a : apps) {
    Column part(a.modes.size(), 0);
    if (on(rng)) part[std::uniform_int_distribution<std::size_t>(0, a.modes.size() - 1)(rng)] = 1;
    c.insert(c.end(), part.begin(), part.end());
  }
  return c;
}

inline EpochProblem problem_for(std::shared_ptr<const ApplianceCatalog> catalog,
                                std::vector<double> x, std::size_t start = 1) {
  EpochProblem p;
  p.window = {start, start + x.size() - 1};
  p.x_window = std::move(x);
  p.catalog = std::move(catalog);
  return p;
}

inline AggregateTrace trace_of(std::vector<double> samples, double interval = 6.0) {
  AggregateTrace t;
  t.samples = std::move(samples);
  t.sample_interval_s = interval;
  return t;
}

}  // namespace sser::testing
