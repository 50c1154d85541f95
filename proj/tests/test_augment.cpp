#include <gtest/gtest.h>

#include <filesystem>

#include "stlenc/augment.hpp"
#include "stlenc/kernel.hpp"
#include "support/oracles.hpp"

namespace stlenc {

inline void PrintTo(Rule r, std::ostream* os) { *os << rule_name(r); }

namespace {

const TrajectorySet& signals() {
  static const TrajectorySet set = sample_mu0(500, 101, 3, 100.0, 17);
  return set;
}

double max_abs_diff(const Formula& a, const Formula& b) {
  const auto ra = robustness_vector(a, signals());
  const auto rb = robustness_vector(b, signals());
  double worst = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) worst = std::max(worst, std::fabs(ra.values[i] - rb.values[i]));
  return worst;
}

TEST(AugmentConfig, DefaultsValidate) {
  AugmentConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.rule_probs[0] += 0.1;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = AugmentConfig{};
  cfg.target_hybrid = 0.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = AugmentConfig{};
  cfg.min_depth = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Rewrite, DeMorganShape) {
  AugmentConfig cfg;
  Rng rng(1);
  Formula f = parse("( x_0 >= 1 and x_1 <= 2 )");
  Formula g = apply_rule(f, Rule::de_morgan, 0, cfg, rng);
  EXPECT_EQ(print(g), "not ( not x_0 >= 1.00000 or not x_1 <= 2.00000 )");
  Formula h = apply_rule(parse("( x_0 >= 1 or x_1 <= 2 )"), Rule::de_morgan, 0, cfg, rng);
  EXPECT_EQ(print(h), "not ( not x_0 >= 1.00000 and not x_1 <= 2.00000 )");
}

TEST(Rewrite, TemporalIdentityWrapsInZeroWindow) {
  AugmentConfig cfg;
  Rng rng(2);
  Formula f = parse("x_2 > 0.5");
  Formula g = apply_rule(f, Rule::temporal_identity, 0, cfg, rng);
  EXPECT_TRUE(g->kind == NodeKind::always || g->kind == NodeKind::eventually);
  EXPECT_TRUE(g->interval.is_identity());
  EXPECT_TRUE(equal(g->lhs, f));
}

TEST(Rewrite, PartitionExample) {
  const auto [outer, inner] = partition_interval({2, 6}, 1, 2, 1.0);
  EXPECT_EQ(outer, (Interval{1, 3}));
  EXPECT_EQ(inner, (Interval{1, 3}));
  Formula phi = parse("x_0 >= 0.2");
  Formula a = make_always({2, 6}, phi);
  Formula b = make_always(outer, make_always(inner, phi));
  EXPECT_EQ(max_abs_diff(a, b), 0.0);
  EXPECT_THROW(partition_interval({2, 6}, 3, 2, 1.0), Error);
  EXPECT_THROW(partition_interval({2, 6}, 1, 4, 1.0), Error);
}

TEST(Rewrite, PredicateInversionCoversAllComparisons) {
  AugmentConfig cfg;
  Rng rng(3);
  const char* cases[][2] = {{"x_0 <= 1", "not x_0 > 1.00000"},
                            {"x_0 >= 1", "not x_0 < 1.00000"},
                            {"x_0 < 1", "not x_0 >= 1.00000"},
                            {"x_0 > 1", "not x_0 <= 1.00000"}};
  for (auto& c : cases) EXPECT_EQ(print(apply_rule(parse(c[0]), Rule::predicate_inversion, 0, cfg, rng)), c[1]);
}

TEST(Rewrite, NotInjectionSkipsNegatedChildren) {
  AugmentConfig cfg;
  auto nodes = applicable_nodes(parse("not x_0 >= 1"), Rule::not_injection, cfg);
  EXPECT_EQ(nodes, std::vector<std::size_t>{0});
}

class PreservingRule : public ::testing::TestWithParam<Rule> {};

TEST_P(PreservingRule, LeavesRobustnessUnchanged) {
  const Rule rule = GetParam();
  AugmentConfig cfg;
  Rng rng(100 + static_cast<int>(rule));
  int applied = 0;
  for (int i = 0; i < 400 && applied < 60; ++i) {
    Formula f = testing::random_formula(rng, {.max_depth = 4, .horizon_budget = 60});
    const auto nodes = applicable_nodes(f, rule, cfg);
    if (nodes.empty()) continue;
    const std::size_t at = nodes[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<long>(nodes.size()) - 1))];
    Formula g = apply_rule(f, rule, at, cfg, rng);
    ASSERT_LE(max_abs_diff(f, g), 1e-9) << rule_name(rule) << ": " << print(f) << " -> " << print(g);
    ++applied;
  }
  EXPECT_GE(applied, 20);
}

INSTANTIATE_TEST_SUITE_P(Rules, PreservingRule,
                         ::testing::Values(Rule::not_injection, Rule::de_morgan, Rule::time_partition,
                                           Rule::temporal_identity, Rule::distributivity,
                                           Rule::predicate_inversion),
                         [](const auto& info) { return std::string(rule_name(info.param)); });

TEST(Rewrite, DualityShiftPreservesRobustness) {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    Formula f = testing::random_formula(rng, {.max_depth = 4, .horizon_budget = 60});
    const auto nodes = preorder(f);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (nodes[j]->kind != NodeKind::always && nodes[j]->kind != NodeKind::eventually) continue;
      ASSERT_EQ(max_abs_diff(f, duality_shift_at(f, j)), 0.0);
    }
  }
}

TEST(EquivalentVariant, ReachesDepthAndKeepsKernel) {
  AugmentConfig cfg;
  Rng rng(4);
  const auto seeds = load_seed_file(STLENC_DATA_DIR "/seeds.stl", 3);
  for (std::size_t s = 0; s < seeds.size(); s += 3) {
    Formula g = make_equivalent_variant(seeds[s], cfg, rng);
    EXPECT_GE(depth(g), 5);
    GramMatrix k = gram({seeds[s], g}, signals());
    EXPECT_GE(k(0, 1), 1.0 - 1e-6) << print(g);
  }
}

TEST(EquivalentVariant, OnlyNoChangeFails) {
  AugmentConfig cfg;
  cfg.rule_probs.fill(0.0);
  cfg.rule_probs[static_cast<std::size_t>(Rule::no_change)] = 1.0;
  Rng rng(5);
  try {
    make_equivalent_variant(parse("x_0 >= 0"), cfg, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("depth-unreachable"), std::string::npos);
  }
}

TEST(Perturb, KeepsShape) {
  AugmentConfig cfg;
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    Formula f = testing::random_formula(rng, {.max_depth = 5});
    EXPECT_TRUE(same_shape(f, perturb(f, cfg, rng)));
  }
}

TEST(Perturb, VibrationBounds) {
  AugmentConfig cfg;
  cfg.vibration_prob = 1.0;
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    Formula f = testing::random_formula(rng, {.max_depth = 4});
    Formula g = perturb(f, cfg, rng);
    const auto a = preorder(f);
    const auto b = preorder(g);
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (a[j]->kind == NodeKind::predicate) {
        const double lo = std::min(0.9 * a[j]->threshold, 1.1 * a[j]->threshold);
        const double hi = std::max(0.9 * a[j]->threshold, 1.1 * a[j]->threshold);
        EXPECT_GE(b[j]->threshold, lo - 1e-12);
        EXPECT_LE(b[j]->threshold, hi + 1e-12);
      }
      if (is_temporal(a[j]->kind) && !a[j]->interval.is_identity()) {
        const double w = a[j]->interval.hi - a[j]->interval.lo;
        const double w2 = b[j]->interval.hi - b[j]->interval.lo;
        EXPECT_EQ(b[j]->interval.lo, a[j]->interval.lo);
        EXPECT_GE(w2, std::max(1.0, std::round(0.6 * w)));
        EXPECT_LE(w2, std::round(1.8 * w));
      }
    }
  }
}

TEST(Perturb, ShiftKeepsWidthAndClampsStart) {
  AugmentConfig cfg;
  cfg.vibration_prob = 0.0;
  Rng rng(9);
  Formula f = parse("always[5,8] x_0 >= 1");
  bool clamped = false;
  for (int i = 0; i < 200; ++i) {
    Formula g = perturb(f, cfg, rng);
    EXPECT_EQ(g->interval.hi - g->interval.lo, 3.0);
    EXPECT_GE(g->interval.lo, 0.0);
    EXPECT_LE(g->interval.lo, 45.0);
    EXPECT_GE(g->lhs->threshold, 1.0 - 6.0 - 1e-9);
    EXPECT_LE(g->lhs->threshold, 1.0 + 6.0 + 1e-9);
    clamped |= g->interval.lo == 0.0;
  }
  EXPECT_TRUE(clamped);
}

TEST(Refine, RejectsHorizonViolation) {
  AugmentConfig cfg;
  const TrajectorySet probe = probe_signal(cfg);
  Rng rng(10);
  RefineResult r = refine_serialized(parse("always[0,60] eventually[0,50] x_0 >= 0"), cfg, rng, probe[0]);
  EXPECT_FALSE(r);
  EXPECT_NE(r.reason.find("horizon"), std::string::npos);
}

TEST(Refine, ZeroDualityKeepsFormula) {
  AugmentConfig cfg;
  cfg.duality_prob = 0.0;
  const TrajectorySet probe = probe_signal(cfg);
  Rng rng(11);
  Formula f = parse("always[0,5] ( x_0 >= 0.25 until[1,2] x_1 < 1 )");
  RefineResult r = refine_serialized(f, cfg, rng, probe[0]);
  ASSERT_TRUE(r);
  EXPECT_TRUE(equal(*r.formula, f));
}

TEST(Refine, DualityKeepsProbeRobustness) {
  AugmentConfig cfg;
  cfg.duality_prob = 1.0;
  const TrajectorySet probe = probe_signal(cfg);
  Rng rng(12);
  Formula f = parse("( always[0,5] x_0 >= 0.25 and eventually[2,9] x_1 < 1 )");
  RefineResult r = refine_serialized(f, cfg, rng, probe[0]);
  ASSERT_TRUE(r);
  EXPECT_FALSE(equal(*r.formula, f));
  EXPECT_EQ(robustness(*r.formula, probe[0]), robustness(f, probe[0]));
}

TEST(Refine, RejectsTokenOverflow) {
  AugmentConfig cfg;
  cfg.max_tokens = 8;
  const TrajectorySet probe = probe_signal(cfg);
  Rng rng(13);
  EXPECT_FALSE(refine_serialized(parse("always[0,5] x_0 >= 0.25"), cfg, rng, probe[0]));
}

TEST(Strata, CountsMatchTargets) {
  AugmentConfig cfg;
  const auto c = strata_counts(1000, cfg);
  EXPECT_EQ(c[0] + c[1] + c[2], 1000u);
  EXPECT_NEAR(static_cast<double>(c[0]), 104, 10);
  EXPECT_NEAR(static_cast<double>(c[1]), 434, 10);
  EXPECT_NEAR(static_cast<double>(c[2]), 457, 10);
}

class DatasetTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_.seed = 2024;
    seeds_ = load_seed_file(STLENC_DATA_DIR "/seeds.stl", 3);
    records_ = build_dataset(seeds_, 1000, cfg_);
  }
  static inline AugmentConfig cfg_;
  static inline std::vector<Formula> seeds_;
  static inline std::vector<DatasetRecord> records_;
};

TEST_F(DatasetTest, Stratified) {
  std::array<int, 3> counts{};
  for (const auto& r : records_) ++counts[static_cast<std::size_t>(r.kind)];
  EXPECT_NEAR(counts[0], 104, 10);
  EXPECT_NEAR(counts[1], 434, 10);
  EXPECT_NEAR(counts[2], 457, 10);
  EXPECT_GE(seeds_.size(), 50u);
}

TEST_F(DatasetTest, RecordsValidAndRoundTrip) {
  const TrajectorySet probe = probe_signal(cfg_);
  for (const auto& r : records_) {
    Formula back = parse(r.text, 3);
    EXPECT_TRUE(equal(back, r.formula));
    EXPECT_NO_THROW(robustness(r.formula, probe[0]));
    EXPECT_LE(formula_tokens(r.formula).size() + 2, cfg_.max_tokens);
    EXPECT_EQ(r.seed_id, r.id % static_cast<std::int64_t>(seeds_.size()));
  }
}

TEST_F(DatasetTest, EquivalentStratumMatchesSeedKernel) {
  int checked = 0;
  for (const auto& r : records_) {
    if (r.kind != VariantKind::equivalent || checked >= 40) continue;
    GramMatrix k = gram({seeds_[static_cast<std::size_t>(r.seed_id)], r.formula}, signals());
    EXPECT_GE(k(0, 1), 1.0 - 1e-6) << r.text;
    EXPECT_GE(depth(r.formula), cfg_.min_depth);
    ++checked;
  }
  EXPECT_EQ(checked, 40);
}

TEST_F(DatasetTest, ParametricKeepsSeedShape) {
  for (const auto& r : records_) {
    if (r.kind != VariantKind::parametric) continue;
    // a duality shift may have rewritten one temporal node
    const Formula& seed = seeds_[static_cast<std::size_t>(r.seed_id)];
    EXPECT_TRUE(same_shape(seed, r.formula) || size(r.formula) == size(seed) + 2) << r.text;
  }
}

TEST_F(DatasetTest, ReproducibleAcrossThreadCounts) {
  const unsigned before = num_threads();
  set_num_threads(3);
  auto again = build_dataset(seeds_, 1000, cfg_);
  set_num_threads(before);
  ASSERT_EQ(again.size(), records_.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].text, records_[i].text);
    EXPECT_EQ(again[i].kind, records_[i].kind);
  }
}

TEST_F(DatasetTest, JsonlRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "stlenc_dataset_test.jsonl").string();
  save_dataset(records_, path);
  auto back = load_dataset(path, 3);
  ASSERT_EQ(back.size(), records_.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, records_[i].id);
    EXPECT_EQ(back[i].text, records_[i].text);
    EXPECT_EQ(back[i].seed_id, records_[i].seed_id);
    EXPECT_EQ(back[i].kind, records_[i].kind);
  }
}

TEST(Dataset, EmptySeedsRejected) {
  EXPECT_THROW(build_dataset({}, 10, AugmentConfig{}), Error);
}

}  // namespace
}  // namespace stlenc
