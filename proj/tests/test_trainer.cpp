#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stlenc/trainer.hpp"

namespace stlenc {
namespace {

struct Fixture {
  std::vector<DatasetRecord> records;
  TrajectorySet set;
};

const Fixture& data() {
  static const Fixture f = [] {
    AugmentConfig cfg;
    cfg.seed = 31;
    auto seeds = load_seed_file(STLENC_DATA_DIR "/seeds.stl", 3);
    return Fixture{build_dataset(seeds, 160, cfg), sample_mu0(100, 101, 3, 100.0, 4)};
  }();
  return f;
}

EncoderConfig small_encoder() {
  EncoderConfig c;
  c.d_model = 32;
  c.layers = 1;
  c.heads = 4;
  c.ff_dim = 64;
  c.out_dim = 16;
  c.seed = 9;
  return c;
}

TEST(Split, BySeedIsDisjoint) {
  const auto& recs = data().records;
  Split s = split_by_seed(recs, 0.2, 1);
  EXPECT_EQ(s.train.size() + s.val.size(), recs.size());
  std::set<std::int64_t> a, b;
  for (auto i : s.train) a.insert(recs[i].seed_id);
  for (auto i : s.val) b.insert(recs[i].seed_id);
  for (auto id : b) EXPECT_EQ(a.count(id), 0u);
  EXPECT_FALSE(b.empty());
  EXPECT_TRUE(split_by_seed(recs, 0.0, 1).val.empty());
}

TEST(Trainer, ZeroLearningRateKeepsParameters) {
  TrainConfig tc;
  tc.optimizer.lr = 0.0;
  tc.epochs = 1;
  tc.micro_batch = 8;
  tc.accumulation = 2;
  TrainResult r = train(data().records, data().set, small_encoder(), tc);
  Encoder<float> fresh(small_encoder());
  ASSERT_GT(r.steps, 3);
  for (std::size_t i = 0; i < fresh.params().size(); ++i) EXPECT_EQ(r.final_model.params()[i], fresh.params()[i]);
}

TEST(Trainer, OverfitsSmallSet) {
  std::vector<DatasetRecord> recs(data().records.begin(), data().records.begin() + 32);
  TrainConfig tc;
  tc.val_fraction = 0.0;
  tc.micro_batch = 32;
  tc.accumulation = 1;
  tc.epochs = 200;
  tc.seed = 2;
  TrainResult r = train(recs, data().set, EncoderConfig{}, tc);
  ASSERT_EQ(r.steps, 200);
  const double last = r.log.back().metrics.alignment;
  EXPECT_GT(last, 0.95);
  std::vector<Formula> fs = formulae_of(recs);
  const Metrics m = evaluate(r.final_model, fs, data().set);
  EXPECT_GE(m.alignment, last - 0.01);
  EXPECT_GE(m.uniformity, -8.0);
  EXPECT_LE(m.uniformity, 0.0);
}

TEST(Trainer, DeterministicLogs) {
  TrainConfig tc;
  tc.epochs = 2;
  tc.micro_batch = 16;
  tc.accumulation = 1;
  tc.seed = 3;
  TrainResult a = train(data().records, data().set, small_encoder(), tc);
  TrainResult b = train(data().records, data().set, small_encoder(), tc);
  ASSERT_EQ(a.log.size(), b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(format_metric_row(a.log[i]), format_metric_row(b.log[i]));
}

template <class S>
ParamList<S> one_step(int micro, int accum) {
  const auto& recs = data().records;
  std::vector<Formula> fs = formulae_of(recs);
  TeacherFeatures teacher = teacher_features(fs, data().set);
  Encoder<S> enc = Encoder<float>(small_encoder()).template cast<S>();
  std::vector<TokenSequence> tokens = enc.tokenize(fs);
  TrainConfig tc;
  tc.micro_batch = micro;
  tc.accumulation = accum;
  AdamW<S> opt(enc.params(), tc.optimizer);
  std::vector<std::size_t> idx{3, 17, 42, 8, 99, 120, 5, 61};
  train_step(enc, opt, tokens, teacher, idx, tc, 0);
  EXPECT_EQ(opt.step_count(), 1);
  return enc.params();
}

TEST(Trainer, AccumulationMatchesLargeBatch) {
  auto a = one_step<double>(4, 2);
  auto b = one_step<double>(8, 1);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE((a[i] - b[i]).cwiseAbs().maxCoeff(), 1e-6);
  auto c = one_step<float>(4, 2);
  auto d = one_step<float>(8, 1);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_LE((c[i] - d[i]).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Trainer, NonFiniteAbortsWithDiagnostic) {
  std::vector<Formula> fs = formulae_of(data().records);
  TeacherFeatures teacher = teacher_features(fs, data().set);
  Encoder<float> enc(small_encoder());
  std::vector<TokenSequence> tokens = enc.tokenize(fs);
  enc.params()[param::tok](tok::eos, 0) = std::nanf("");
  TrainConfig tc;
  AdamW<float> opt(enc.params(), tc.optimizer);
  try {
    train_step(enc, opt, tokens, teacher, {0, 1, 2, 3}, tc, 7);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
    EXPECT_NE(std::string(e.what()).find("step 7"), std::string::npos) << e.what();
  }
}

TEST(Trainer, CheckpointReproducesValidation) {
  const auto dir = (std::filesystem::temp_directory_path() / "stlenc_trainer_test").string();
  std::filesystem::remove_all(dir);
  TrainConfig tc;
  tc.epochs = 2;
  tc.micro_batch = 16;
  tc.accumulation = 1;
  tc.val_fraction = 0.2;
  TrainResult r = train(data().records, data().set, small_encoder(), tc, {dir});
  ASSERT_TRUE(std::filesystem::exists(dir + "/best.stle"));
  ASSERT_TRUE(std::filesystem::exists(dir + "/last.stlo"));
  Encoder<float> best = load_encoder(dir + "/best.stle");
  std::vector<Formula> val;
  for (auto i : r.split.val) val.push_back(data().records[i].formula);
  const Metrics m = evaluate(best, val, data().set);
  EXPECT_EQ(m.alignment, r.best_val_alignment);

  std::ifstream in(dir + "/metrics.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, kMetricHeader);
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  EXPECT_EQ(lines, r.log.size());
}

TEST(Trainer, Errors) {
  TrainConfig tc;
  std::vector<DatasetRecord> one(data().records.begin(), data().records.begin() + 1);
  EXPECT_THROW(train(one, data().set, small_encoder(), tc), Error);
  EXPECT_THROW(evaluate(Encoder<float>(small_encoder()), std::vector<Formula>{}, data().set), Error);
  tc.optimizer.lr = -1;
  EXPECT_THROW(train(data().records, data().set, small_encoder(), tc), Error);
}

TEST(BlockMeans, DropsPartialWindow) {
  EXPECT_EQ(block_means({1, 2, 3, 4, 5}, 2), (std::vector<double>{1.5, 3.5}));
}

TEST(AdamW, StateRoundTrip) {
  Encoder<float> enc(small_encoder());
  AdamW<float> opt(enc.params(), {});
  ParamList<float> g = zeros_like(enc.params());
  for (auto& m : g) m.setConstant(0.1f);
  opt.step(enc.params(), g);
  const auto path = (std::filesystem::temp_directory_path() / "stlenc_opt.stlo").string();
  opt.save(path);
  AdamW<float> back(enc.params(), {});
  back.load(path);
  EXPECT_EQ(back.step_count(), 1);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(back.second_moment()[i], opt.second_moment()[i]);
}

}  // namespace
}  // namespace stlenc
