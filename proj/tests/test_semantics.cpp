#include <gtest/gtest.h>

#include "stlenc/parser.hpp"
#include "stlenc/semantics.hpp"
#include "support/oracles.hpp"

namespace stlenc {
namespace {

Trajectory constant(double value, std::size_t points = 11, double horizon = 10.0) {
  Trajectory t(points, 1, horizon);
  for (std::size_t p = 0; p < points; ++p) t.at(p, 0) = static_cast<float>(value);
  return t;
}

TEST(Robustness, AtomicPredicate) {
  Trajectory xi = constant(3.0);
  EXPECT_DOUBLE_EQ(robustness(parse("x_0 >= 2"), xi.view()), 1.0);
  EXPECT_DOUBLE_EQ(robustness(parse("x_0 > 2"), xi.view()), 1.0);
  EXPECT_DOUBLE_EQ(robustness(parse("x_0 <= 2"), xi.view()), -1.0);
  EXPECT_DOUBLE_EQ(robustness(parse("not (x_0 >= 2)"), xi.view()), -1.0);
  EXPECT_DOUBLE_EQ(robustness(make_true(), xi.view()), kTrueRobustness);
}

TEST(Robustness, EventuallyWindow) {
  Trajectory xi(3, 1, 2.0);
  xi.at(0, 0) = 0;
  xi.at(1, 0) = 1;
  xi.at(2, 0) = 5;
  EXPECT_DOUBLE_EQ(robustness(parse("eventually[0,2] x_0 >= 2"), xi.view()), 3.0);
  EXPECT_DOUBLE_EQ(robustness(parse("always[0,2] x_0 >= 2"), xi.view()), -2.0);
  EXPECT_DOUBLE_EQ(robustness(parse("always[1,2] x_0 >= 2"), xi.view()), -1.0);
}

TEST(Robustness, UntilMaxMinMin) {
  Trajectory xi(4, 2, 3.0);
  // x_0: lhs robustness, x_1: rhs robustness
  const float lhs[] = {4, 3, -1, 5};
  const float rhs[] = {-2, 1, 6, 7};
  for (int p = 0; p < 4; ++p) {
    xi.at(p, 0) = lhs[p];
    xi.at(p, 1) = rhs[p];
  }
  // t'=1: min(1, min(4,3)) = 1; t'=2: min(6, -1) = -1; t'=3: min(7, -1) = -1
  EXPECT_DOUBLE_EQ(robustness(parse("( x_0 >= 0 until[1,3] x_1 >= 0 )"), xi.view()), 1.0);
  // t'=0 only: min(-2, 4)
  EXPECT_DOUBLE_EQ(robustness(parse("( x_0 >= 0 until[0,0] x_1 >= 0 )"), xi.view()), -2.0);
}

TEST(Robustness, HorizonViolation) {
  Trajectory xi = constant(1.0);
  try {
    robustness(parse("always[0,6] eventually[0,5] x_0 >= 0"), xi.view());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::horizon);
  }
  EXPECT_THROW(robustness(parse("always[0,11] x_0 >= 0"), xi.view()), Error);
  EXPECT_NO_THROW(robustness(parse("always[0,5] eventually[0,5] x_0 >= 0"), xi.view()));
  EXPECT_THROW(robustness(parse("always[0,5] x_0 >= 0"), xi.view(), 6), Error);
}

TEST(Robustness, MatchesNaiveOracleAtEveryStart) {
  Rng rng(17);
  TrajectorySet set = sample_mu0(20, 41, 3, 40.0, 2);
  for (int i = 0; i < 150; ++i) {
    Formula f = testing::random_formula(rng, {.max_depth = 5, .horizon_budget = 30});
    const std::size_t t = static_cast<std::size_t>(uniform_int(rng, 0, 10));
    const TrajectoryView xi = set[static_cast<std::size_t>(i) % set.size()];
    const double fast = robustness(f, xi, t);
    const double slow = testing::naive_robustness(f, xi, t);
    ASSERT_NEAR(fast, slow, 1e-9 * std::max(1.0, std::fabs(slow))) << print(f);
  }
}

TEST(Robustness, NegationAndDualities) {
  Rng rng(23);
  TrajectorySet set = sample_mu0(30, 41, 3, 40.0, 4);
  for (int i = 0; i < 100; ++i) {
    Formula a = testing::random_formula(rng, {.max_depth = 3, .horizon_budget = 15});
    Formula b = testing::random_formula(rng, {.max_depth = 3, .horizon_budget = 15});
    const Interval iv{2, 9};
    for (std::size_t k = 0; k < set.size(); ++k) {
      const TrajectoryView xi = set[k];
      const double ra = robustness(a, xi), rb = robustness(b, xi);
      ASSERT_EQ(robustness(make_not(a), xi), -ra);
      ASSERT_EQ(robustness(make_and(a, b), xi), std::min(ra, rb));
      ASSERT_EQ(robustness(make_not(make_or(make_not(a), make_not(b))), xi), std::min(ra, rb));
      ASSERT_EQ(robustness(make_always(iv, a), xi), robustness(make_not(make_eventually(iv, make_not(a))), xi));
    }
  }
}

TEST(Robustness, ThresholdMonotonicity) {
  TrajectorySet set = sample_mu0(50, 5, 1, 4.0, 8);
  for (std::size_t k = 0; k < set.size(); ++k) {
    const double r0 = robustness(make_predicate(0, Comparison::ge, 0.5), set[k]);
    const double r1 = robustness(make_predicate(0, Comparison::ge, 0.75), set[k]);
    EXPECT_DOUBLE_EQ(r0 - r1, 0.25);
  }
}

TEST(Satisfies, ConstantSignal) {
  Trajectory xi = constant(3.0);
  EXPECT_TRUE(satisfies(parse("x_0 >= 2"), xi.view()));
  EXPECT_FALSE(satisfies(parse("not x_0 >= 2"), xi.view()));
}

TEST(Satisfies, TiesFollowStrictness) {
  Trajectory xi = constant(2.0);
  EXPECT_TRUE(satisfies(parse("x_0 >= 2"), xi.view()));
  EXPECT_FALSE(satisfies(parse("x_0 > 2"), xi.view()));
  EXPECT_TRUE(satisfies(parse("x_0 <= 2"), xi.view()));
  EXPECT_FALSE(satisfies(parse("x_0 < 2"), xi.view()));
  EXPECT_EQ(robustness(parse("x_0 > 2"), xi.view()), 0.0);
}

TEST(Satisfies, AgreesWithRobustnessSign) {
  Rng rng(29);
  TrajectorySet set = sample_mu0(40, 41, 3, 40.0, 6);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    Formula f = testing::random_formula(rng, {.max_depth = 6, .horizon_budget = 30});
    const TrajectoryView xi = set[static_cast<std::size_t>(i) % set.size()];
    const double r = robustness(f, xi);
    if (r == 0.0) continue;
    ASSERT_EQ(satisfies(f, xi), r > 0.0) << print(f);
    ++checked;
  }
  EXPECT_GT(checked, 900);
}

TEST(RobustnessVector, MatchesPointwiseCalls) {
  TrajectorySet set = sample_mu0(64, 21, 2, 20.0, 12);
  Formula f = parse("( always[0,5] x_0 >= -1 or eventually[2,8] x_1 < 0.5 )");
  RobustnessVector rv = robustness_vector(f, set, 7);
  ASSERT_EQ(rv.size(), 64u);
  EXPECT_EQ(rv.formula_id, 7);
  RobustnessVector neg = robustness_vector(make_not(f), set);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(rv.values[i], robustness(f, set[i]));
    EXPECT_EQ(neg.values[i], -rv.values[i]);
  }
  RobustnessVector top = robustness_vector(make_true(), set);
  for (double v : top.values) EXPECT_EQ(v, kTrueRobustness);
}

TEST(RobustnessVector, ThreadCountDoesNotChangeResults) {
  TrajectorySet set = sample_mu0(101, 21, 2, 20.0, 12);
  Formula f = parse("( x_0 >= 0 until[1,6] always[0,3] x_1 <= 0.2 )");
  set_num_threads(1);
  RobustnessVector a = robustness_vector(f, set);
  set_num_threads(4);
  RobustnessVector b = robustness_vector(f, set);
  set_num_threads(0);
  EXPECT_EQ(a.values, b.values);
}

}  // namespace
}  // namespace stlenc
