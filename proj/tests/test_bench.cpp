#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "stlenc/augment.hpp"
#include "stlenc/bench.hpp"

namespace stlenc {
namespace {

EncoderConfig small_encoder() {
  EncoderConfig c;
  c.d_model = 32;
  c.layers = 1;
  c.heads = 2;
  c.ff_dim = 64;
  c.out_dim = 16;
  c.seed = 2;
  return c;
}

const std::vector<Formula>& formulae() {
  static const std::vector<Formula> fs = [] {
    AugmentConfig cfg;
    cfg.seed = 5;
    return formulae_of(build_dataset(load_seed_file(STLENC_DATA_DIR "/seeds.stl", 3), 80, cfg));
  }();
  return fs;
}

TEST(BenchGrid, Parses) {
  const BenchGrid g = parse_grid("B=10,20;N=100,400");
  EXPECT_EQ(g.B, (std::vector<std::size_t>{10, 20}));
  EXPECT_EQ(g.N, (std::vector<std::size_t>{100, 400}));
  EXPECT_EQ(parse_grid("N=5;B=3").B, (std::vector<std::size_t>{3}));
}

TEST(BenchGrid, RejectsMalformedText) {
  for (const char* bad : {"", "B=10", "N=10", "B=10;N=x", "B=0;N=1", "B=1;M=2", "B10;N=1", "B=1,;N=2"}) {
    try {
      parse_grid(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::config) << bad;
    }
  }
}

TEST(Bench, RecordsCoverTheGrid) {
  BenchConfig cfg;
  cfg.repetitions = 1;
  const BenchGrid grid = parse_grid("B=8,16;N=10,20");
  const auto recs = run_bench(BenchPhase::embed, formulae(), grid, Encoder<float>(small_encoder()), cfg);
  ASSERT_EQ(recs.size(), 3u * 2u * 2u);
  for (const auto& r : recs) {
    EXPECT_GT(r.seconds, 0.0);
    EXPECT_GT(r.peak_mb, 0.0);
    EXPECT_EQ(r.P, 101u);
    EXPECT_EQ(r.phase, BenchPhase::embed);
    EXPECT_FALSE(r.oom);
  }
  EXPECT_EQ(recs.front().method, BenchMethod::kernel);
  EXPECT_EQ(recs.back().method, BenchMethod::encoder_full);
}

TEST(Bench, MatricesMatchTheProductionPaths) {
  BenchConfig cfg;
  cfg.repetitions = 1;
  cfg.seed = 3;
  const Encoder<float> enc(small_encoder());
  const std::vector<Formula> first(formulae().begin(), formulae().begin() + 12);
  const auto set = sample_mu0(30, cfg.points, cfg.vars, cfg.horizon, cfg.seed);

  BenchArtifacts art;
  BenchGrid grid{{12}, {30}};
  run_bench(BenchPhase::similarity, formulae(), grid, enc, cfg, &art);
  EXPECT_EQ(art.kernel_features, gram(first, set).values);
  const Eigen::MatrixXf E = enc.embed(first);
  EXPECT_EQ(art.encoder_output, Eigen::MatrixXf(E * E.transpose()));

  run_bench(BenchPhase::embed, formulae(), grid, enc, cfg, &art);
  EXPECT_EQ(art.kernel_features, robustness_matrix(first, set));
  EXPECT_EQ(art.encoder_output, E);
}

TEST(Bench, BudgetProducesOomRecordsForTheKernelOnly) {
  BenchConfig cfg;
  cfg.repetitions = 1;
  cfg.memory_budget_mb = 1.0;
  const BenchGrid grid = parse_grid("B=16;N=10,2000");
  const auto recs = run_bench(BenchPhase::similarity, formulae(), grid, Encoder<float>(small_encoder()), cfg);
  int ooms = 0;
  for (const auto& r : recs) {
    if (r.oom) {
      ++ooms;
      EXPECT_EQ(r.method, BenchMethod::kernel);
      EXPECT_EQ(r.N, 2000u);
      EXPECT_GT(r.peak_mb, 1.0);
      EXPECT_NE(format_bench_record(r).find(",OOM"), std::string::npos);
    }
  }
  EXPECT_EQ(ooms, 1);
}

TEST(Bench, TooFewFormulaeIsAnError) {
  BenchConfig cfg;
  EXPECT_THROW(run_bench(BenchPhase::embed, formulae(), parse_grid("B=1000;N=10"), Encoder<float>(small_encoder()), cfg),
               Error);
}

TEST(Bench, CsvHasHeaderAndOneLinePerRecord) {
  BenchConfig cfg;
  cfg.repetitions = 1;
  const auto recs = run_bench(BenchPhase::embed, formulae(), parse_grid("B=4;N=10"), Encoder<float>(small_encoder()), cfg);
  const auto path = (std::filesystem::temp_directory_path() / "stlenc_bench.csv").string();
  write_bench_csv(recs, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kBenchHeader);
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 3);
  EXPECT_NE(bench_summary(recs).find("embed"), std::string::npos);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace stlenc
