#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace sser;
using namespace sser::testing;

namespace {

StateMatrix random_states(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::bernoulli_distribution bit(0.5);
  StateMatrix s(rows, cols);
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t t = 0; t < cols; ++t) s.set(n, t, bit(rng));
  }
  return s;
}

}  // namespace

TEST(EventMatrix, ConstantRowHasNoEvents) {
  const EventMatrix e = event_matrix(StateMatrix::from_rows({{1, 1, 1, 1}}));
  ASSERT_EQ(e.rows(), 1U);
  ASSERT_EQ(e.cols(), 3U);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(e.at(0, t), 0);
}

TEST(EventMatrix, OnThenOff) {
  const EventMatrix e = event_matrix(StateMatrix::from_rows({{0, 1, 1, 0}}));
  EXPECT_EQ(e.at(0, 0), 1);
  EXPECT_EQ(e.at(0, 1), 0);
  EXPECT_EQ(e.at(0, 2), -1);
}

TEST(EventMatrix, MatchesProductWithDifferenceOperator) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const StateMatrix s = random_states(rng, 3, 8);
    // D is T x (T-1) with -1 on the diagonal and +1 just below it.
    std::vector<std::vector<int>> d(8, std::vector<int>(7, 0));
    for (std::size_t k = 0; k < 7; ++k) {
      d[k][k] = -1;
      d[k + 1][k] = 1;
    }
    const EventMatrix e = event_matrix(s);
    for (std::size_t n = 0; n < 3; ++n) {
      for (std::size_t k = 0; k < 7; ++k) {
        int product = 0;
        for (std::size_t t = 0; t < 8; ++t) product += (s.at(n, t) ? 1 : 0) * d[t][k];
        EXPECT_EQ(e.at(n, k), product);
      }
    }
  }
}

TEST(EventMatrix, NeedsTwoColumns) {
  EXPECT_THROW(event_matrix(StateMatrix::from_rows({{1}})), DimensionError);
}

TEST(EventMatrix, CumulativeSumRecoversStates) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const StateMatrix s = random_states(rng, 5, 12);
    const EventMatrix e = event_matrix(s);
    for (std::size_t n = 0; n < s.rows(); ++n) {
      int level = s.at(n, 0) ? 1 : 0;
      for (std::size_t t = 1; t < s.cols(); ++t) {
        level += e.at(n, t - 1);
        EXPECT_EQ(level, s.at(n, t) ? 1 : 0);
      }
    }
  }
}

TEST(TotalVariation, ZeroEventsGiveZero) {
  EXPECT_EQ(total_variation(event_matrix(StateMatrix(3, 6))), 0U);
}

TEST(TotalVariation, OneOnOneOff) {
  EXPECT_EQ(total_variation(event_matrix(StateMatrix::from_rows({{0, 1, 1, 0}}))), 2U);
}

TEST(TotalVariation, CountsAdjacentDisagreements) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const StateMatrix s = random_states(rng, 4, 10);
    std::size_t naive = 0;
    for (std::size_t n = 0; n < 4; ++n) {
      for (std::size_t t = 0; t + 1 < 10; ++t) naive += s.at(n, t) != s.at(n, t + 1) ? 1 : 0;
    }
    EXPECT_EQ(total_variation(event_matrix(s)), naive);
    EXPECT_EQ(total_variation(s), naive);
  }
}

TEST(TotalVariation, ZeroExactlyWhenColumnsIdentical) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    StateMatrix s = random_states(rng, 3, 4);
    if (trial % 2 == 0) {
      for (std::size_t t = 1; t < 4; ++t) s.set_column(t, s.column(0));
    }
    bool identical = true;
    for (std::size_t t = 1; t < 4; ++t) identical = identical && s.column(t) == s.column(0);
    EXPECT_EQ(total_variation(event_matrix(s)) == 0, identical);
  }
}

TEST(FeasibleStates, SingleApplianceOn) {
  const ApplianceCatalog c = single_mode_catalog({{10, 1}});
  const auto states = feasible_states_at(10, c);
  ASSERT_EQ(states.size(), 1U);
  EXPECT_EQ(states[0], StateColumn(1));
}

TEST(FeasibleStates, GapBetweenStandbyAndOn) {
  EXPECT_TRUE(feasible_states_at(5, single_mode_catalog({{10, 1}})).empty());
}

TEST(FeasibleStates, TwoAppliancesBothOn) {
  const ApplianceCatalog c = single_mode_catalog({{10, 1}, {20, 1}});
  std::vector<Column> expected;
  for (const Column& col : all_mode_columns(c.appliances())) {
    if (column_fits(c.appliances(), col, 30)) expected.push_back(col);
  }
  ASSERT_EQ(expected, (std::vector<Column>{{1, 1}}));
  const auto states = feasible_states_at(30, c);
  ASSERT_EQ(states.size(), 1U);
  EXPECT_EQ(to_column(states[0], 2), expected[0]);
}

TEST(FeasibleStates, ClosedUnderIntervalTest) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> xdist(0.0, 400.0);
  for (int trial = 0; trial < 300; ++trial) {
    const ApplianceCatalog c = random_catalog(rng, 8);
    const double x = trial % 3 == 0 ? std::round(xdist(rng)) : xdist(rng);
    std::vector<Column> expected;
    for (const Column& col : all_mode_columns(c.appliances())) {
      if (column_fits(c.appliances(), col, x)) expected.push_back(col);
    }
    std::vector<Column> got;
    for (StateColumn s : feasible_states_at(x, c)) {
      EXPECT_TRUE(c.satisfies_mode_constraint(s));
      got.push_back(to_column(s, c.row_count()));
    }
    EXPECT_EQ(got, expected) << "trial " << trial << " x=" << x;
  }
}

TEST(FeasibleStates, OutputInLexOrder) {
  const ApplianceCatalog c = table2_catalog();
  const auto states = feasible_states_at(1200, c);
  ASSERT_GT(states.size(), 1U);
  for (std::size_t k = 1; k < states.size(); ++k) EXPECT_TRUE(lex_less(states[k - 1], states[k]));
}

TEST(FeasibleStates, BoundaryIsClosed) {
  const ApplianceCatalog c = single_mode_catalog({{10, 1}});
  EXPECT_EQ(feasible_states_at(9, c).size(), 1U);
  EXPECT_EQ(feasible_states_at(11, c).size(), 1U);
  EXPECT_TRUE(feasible_states_at(11.01, c).empty());
}

TEST(Catalog, BaselineCountsStandbyOncePerAppliance) {
  const ApplianceCatalog c({{"a", 3, {{40, 5}, {50, 5}}}, {"b", 2, {{10, 1}}}});
  EXPECT_EQ(c.row_count(), 3U);
  EXPECT_DOUBLE_EQ(c.baseline_w(), 5.0);
  EXPECT_EQ(c.pattern(1), (PowerPattern{3, 50, 5}));
  EXPECT_EQ(c.appliance_of(2), 1U);
  EXPECT_EQ(c.mode_of(1), 1U);
  EXPECT_EQ(c.row_label(1), "a#2");
}

TEST(Catalog, ModeConstraint) {
  const ApplianceCatalog c({{"a", 0, {{40, 5}, {50, 5}}}, {"b", 0, {{10, 1}}}});
  EXPECT_TRUE(c.satisfies_mode_constraint(StateColumn(0b101)));
  EXPECT_FALSE(c.satisfies_mode_constraint(StateColumn(0b011)));
  EXPECT_FALSE(c.satisfies_mode_constraint(StateColumn(0b1000)));
  EXPECT_EQ(c.active_mode(StateColumn(0b010), 0), 1);
  EXPECT_EQ(c.active_mode(StateColumn(0b100), 0), -1);
}

TEST(Catalog, RejectsInvalidInput) {
  EXPECT_THROW(ApplianceCatalog(std::vector<Appliance>{}), ValidationError);
  EXPECT_THROW(ApplianceCatalog({{"a", 5, {{10, 5}}}}), ValidationError);  // 10-5 not above 5
  EXPECT_THROW(ApplianceCatalog({{"a", 0, {{-1, 0}}}}), ValidationError);
  EXPECT_THROW(ApplianceCatalog({{"a", 0, {{10, -1}}}}), ValidationError);
  EXPECT_THROW(ApplianceCatalog({{"a", -1, {{10, 1}}}}), ValidationError);
  EXPECT_THROW(ApplianceCatalog({{"", 0, {{10, 1}}}}), ValidationError);
  EXPECT_THROW(ApplianceCatalog({{"a", 0, {}}}), ValidationError);
  try {
    ApplianceCatalog({{"ok", 0, {{10, 1}}}, {"Kettle", 100, {{50, 10}}}});
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("Kettle"), std::string::npos);
  }
}

TEST(Catalog, ScaledDeviation) {
  const ApplianceCatalog c = single_mode_catalog({{10, 1}});
  const ApplianceCatalog wide = c.with_scaled_deviation(2.0);
  EXPECT_DOUBLE_EQ(wide.deviation()[0], 2.0);
  EXPECT_TRUE(wide.is_feasible(11.5, StateColumn(1)));
  EXPECT_FALSE(c.is_feasible(11.5, StateColumn(1)));
  EXPECT_THROW((void)c.with_scaled_deviation(0.0), ValidationError);
}

TEST(Catalog, ModeConstrainedColumnsInLexOrder) {
  const ApplianceCatalog c({{"a", 0, {{40, 5}, {50, 5}}}, {"b", 0, {{10, 1}}}});
  const auto cols = mode_constrained_columns(c, 100);
  ASSERT_EQ(cols.size(), 6U);
  std::vector<Column> got;
  for (StateColumn s : cols) got.push_back(to_column(s, 3));
  EXPECT_EQ(got, all_mode_columns(c.appliances()));
  EXPECT_THROW(mode_constrained_columns(c, 5), ResourceError);
}

TEST(StateColumn, LexOrderAndHamming) {
  // Row 0 decides first; 0 < 1.
  EXPECT_TRUE(lex_less(StateColumn(0b10), StateColumn(0b01)));
  EXPECT_FALSE(lex_less(StateColumn(0b01), StateColumn(0b10)));
  EXPECT_FALSE(lex_less(StateColumn(0b11), StateColumn(0b11)));
  EXPECT_EQ(hamming(StateColumn(0b1011), StateColumn(0b0110)), 3);
}

TEST(StateMatrix, FromRowsRejectsNonBinary) {
  EXPECT_THROW(StateMatrix::from_rows({{0, 2}}), ValidationError);
  EXPECT_THROW(StateMatrix::from_rows({{0, 1}, {1}}), DimensionError);
}

TEST(AggregateTrace, Validation) {
  EXPECT_NO_THROW(trace_of({1, 2, 3}).validate());
  EXPECT_THROW(trace_of({1, -2, 3}).validate(), ValidationError);
  EXPECT_THROW(trace_of({}).validate(), ValidationError);
  EXPECT_THROW(trace_of({1}, 0.0).validate(), ValidationError);
}
