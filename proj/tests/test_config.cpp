#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "stlenc/config.hpp"

namespace stlenc {
namespace {

std::string write_tmp(const std::string& name, const std::string& text) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream(path) << text;
  return path;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error";
  return ErrorKind::numeric;
}

TEST(Config, ReadsKeyValuesWithComments) {
  const auto path = write_tmp("stlenc_cfg1.cfg", "# header\nlr = 0.5\n\n  epochs=3   # trailing\npooling = mean\n");
  const KeyValues kv = read_key_values(path);
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"lr", "0.5"}));
  EXPECT_EQ(kv[1].second, "3");
  EXPECT_EQ(kv[2].first, "pooling");
}

TEST(Config, MalformedFilesAreConfigErrors) {
  EXPECT_EQ(kind_of([] { read_key_values(write_tmp("stlenc_cfg2.cfg", "lr 0.5\n")); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { read_key_values(write_tmp("stlenc_cfg3.cfg", "lr=1\nlr=2\n")); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { read_key_values(write_tmp("stlenc_cfg4.cfg", "=2\n")); }), ErrorKind::config);
  EXPECT_EQ(kind_of([] { read_key_values("/nonexistent/x.cfg"); }), ErrorKind::io);
}

TEST(Config, BindingSetsTypedFields) {
  TrainConfig t;
  EncoderConfig e;
  ConfigBinding tb, eb;
  bind_train(tb, t);
  bind_encoder(eb, e);
  tb.apply({{"lr", "0.25"}, {"epochs", "7"}, {"include_diagonal", "false"}}, "test");
  eb.apply({{"pooling", "bos"}, {"layers", "0"}}, "test");
  EXPECT_EQ(t.optimizer.lr, 0.25);
  EXPECT_EQ(t.epochs, 7u);
  EXPECT_FALSE(t.loss.include_diagonal);
  EXPECT_EQ(e.pooling, Pooling::bos);
  EXPECT_EQ(e.layers, 0u);
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
  TrainConfig t;
  ConfigBinding b;
  bind_train(b, t);
  EXPECT_EQ(kind_of([&] { b.set("learning_rate", "1"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([&] { b.set("epochs", "3.5"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([&] { b.set("lr", "fast"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([&] { b.set("lr", "inf"); }), ErrorKind::config);
  EXPECT_EQ(kind_of([&] { b.set("include_diagonal", "yes"); }), ErrorKind::config);
}

TEST(Config, LaterValuesOverrideEarlierOnes) {
  TrainConfig t;
  ConfigBinding b;
  bind_train(b, t);
  b.apply(read_key_values(write_tmp("stlenc_cfg5.cfg", "lr=0.1\nepochs=4\n")), "file");
  b.set("lr", "0.2", "command line");
  EXPECT_EQ(t.optimizer.lr, 0.2);
  EXPECT_EQ(t.epochs, 4u);
}

TEST(Config, DumpRoundTripsEveryField) {
  AugmentConfig a;
  a.seed = 99;
  a.shift_time_hi = 33.5;
  a.rule_probs[2] = 0.123456789012345;
  ConfigBinding b;
  bind_augment(b, a);
  const std::string dump = b.dump();
  AugmentConfig c;
  ConfigBinding cb;
  bind_augment(cb, c);
  cb.apply(read_key_values(write_tmp("stlenc_cfg6.cfg", dump)), "dump");
  EXPECT_EQ(cb.dump(), dump);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.rule_probs[2], a.rule_probs[2]);
  EXPECT_EQ(b.dump_line().find('\n'), std::string::npos);
}

TEST(Config, DuplicateBindingIsAnError) {
  double x = 0;
  ConfigBinding b;
  b.bind("x", x);
  EXPECT_EQ(kind_of([&] { b.bind("x", x); }), ErrorKind::config);
}

}  // namespace
}  // namespace stlenc
