#pragma once

// Post-training evaluation: semantic agreement between the encoder and the
// kernel, frozen-embedding regression probes, and nearest-neighbour lookup.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"
#include "stlenc/augment.hpp"
#include "stlenc/encoder.hpp"
#include "stlenc/kernel.hpp"
#include "stlenc/optimizer.hpp"

namespace stlenc {

// ---- semantic agreement -----------------------------------------------------

enum class PairCategory { equivalent, non_equivalent, lexically_similar };
inline constexpr std::size_t kPairCategoryCount = 3;

inline std::string_view category_name(PairCategory c) {
  switch (c) {
    case PairCategory::equivalent: return "equivalent";
    case PairCategory::non_equivalent: return "non_equivalent";
    case PairCategory::lexically_similar: return "lexically_similar";
  }
  return "?";
}

inline PairCategory parse_category(std::string_view s) {
  for (std::size_t i = 0; i < kPairCategoryCount; ++i) {
    if (category_name(static_cast<PairCategory>(i)) == s) return static_cast<PairCategory>(i);
  }
  throw Error(ErrorKind::validation, "unknown pair category: " + std::string(s));
}

struct FormulaPair {
  Formula a;
  Formula b;
  PairCategory category = PairCategory::equivalent;
};

struct CategoryAgreement {
  std::size_t pairs = 0;
  double neural = 0.0;  // mean cosine of embeddings
  double kernel = 0.0;  // mean kernel value
  double mae = 0.0;     // mean |neural - kernel|
  double neural_distance = 0.0;  // mean of (1 - neural) / max over all pairs
  double kernel_distance = 0.0;
};

struct AgreementReport {
  std::array<CategoryAgreement, kPairCategoryCount> categories{};

  const CategoryAgreement& operator[](PairCategory c) const { return categories[static_cast<std::size_t>(c)]; }
};

/// Per-pair similarities: column 0 neural, column 1 kernel.
template <class S>
Eigen::MatrixXd pair_similarities(const Encoder<S>& enc, const std::vector<FormulaPair>& pairs,
                                  const TrajectorySet& set, double sigma2 = kDefaultSigma2) {
  std::vector<Formula> lhs, rhs;
  for (const auto& p : pairs) {
    lhs.push_back(p.a);
    rhs.push_back(p.b);
  }
  const Eigen::MatrixXd ea = enc.embed(lhs).template cast<double>();
  const Eigen::MatrixXd eb = enc.embed(rhs).template cast<double>();
  const Eigen::MatrixXd ra = normalized_rows(robustness_matrix(lhs, set));
  const Eigen::MatrixXd rb = normalized_rows(robustness_matrix(rhs, set));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(pairs.size()), 2);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    out(i, 0) = std::clamp(ea.row(i).dot(eb.row(i)), -1.0, 1.0);
    out(i, 1) = rbf(std::clamp(ra.row(i).dot(rb.row(i)), -1.0, 1.0), sigma2);
  }
  return out;
}

/// Aggregates pair similarities by category. Relative distances divide each
/// method's 1 - similarity by that method's maximum over every pair given.
inline AgreementReport summarize_agreement(const std::vector<FormulaPair>& pairs, const Eigen::MatrixXd& sims) {
  if (sims.rows() != static_cast<Eigen::Index>(pairs.size()) || sims.cols() != 2) {
    throw Error(ErrorKind::validation, "agreement: similarity table does not match the pairs");
  }
  AgreementReport rep;
  const Eigen::ArrayXd dn = 1.0 - sims.col(0).array();
  const Eigen::ArrayXd dk = 1.0 - sims.col(1).array();
  const double max_n = pairs.empty() ? 0.0 : dn.maxCoeff();
  const double max_k = pairs.empty() ? 0.0 : dk.maxCoeff();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& c = rep.categories[static_cast<std::size_t>(pairs[i].category)];
    const auto r = static_cast<Eigen::Index>(i);
    ++c.pairs;
    c.neural += sims(r, 0);
    c.kernel += sims(r, 1);
    c.mae += std::fabs(sims(r, 0) - sims(r, 1));
    c.neural_distance += max_n > 0.0 ? dn(r) / max_n : 0.0;
    c.kernel_distance += max_k > 0.0 ? dk(r) / max_k : 0.0;
  }
  for (std::size_t k = 0; k < kPairCategoryCount; ++k) {
    auto& c = rep.categories[k];
    if (c.pairs == 0) {
      throw Error(ErrorKind::validation,
                  "agreement: category " + std::string(category_name(static_cast<PairCategory>(k))) + " is empty");
    }
    const double n = static_cast<double>(c.pairs);
    c.neural /= n;
    c.kernel /= n;
    c.mae /= n;
    c.neural_distance /= n;
    c.kernel_distance /= n;
  }
  return rep;
}

template <class S>
AgreementReport agreement_eval(const Encoder<S>& enc, const std::vector<FormulaPair>& pairs, const TrajectorySet& set,
                               double sigma2 = kDefaultSigma2) {
  for (std::size_t k = 0; k < kPairCategoryCount; ++k) {
    const auto cat = static_cast<PairCategory>(k);
    if (std::none_of(pairs.begin(), pairs.end(), [&](const FormulaPair& p) { return p.category == cat; })) {
      throw Error(ErrorKind::validation, "agreement: category " + std::string(category_name(cat)) + " is empty");
    }
  }
  return summarize_agreement(pairs, pair_similarities(enc, pairs, set, sigma2));
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct PairMiningConfig {
  std::size_t per_category = 100;
  double hard_negative_max_kernel = 0.7;  // lexically similar pairs stay below this
  double non_equivalent_max_kernel = 0.99;
  double sigma2 = kDefaultSigma2;
  std::uint64_t seed = 0;
};

/// Builds the three pair categories from a corpus. Equivalent pairs come from
/// the equivalence rewrites; lexically similar pairs match an anchor with the
/// corpus formula at minimal edit distance among those below the kernel bound.
inline std::vector<FormulaPair> make_agreement_pairs(const std::vector<Formula>& corpus, const TrajectorySet& set,
                                                     const AugmentConfig& aug, const PairMiningConfig& cfg) {
  if (corpus.size() < 2) throw Error(ErrorKind::validation, "pair mining needs at least 2 corpus formulae");
  if (cfg.per_category == 0) throw Error(ErrorKind::config, "pairs per category must be >= 1");
  const Eigen::MatrixXd unit = normalized_rows(robustness_matrix(corpus, set));
  const Eigen::MatrixXd K = gram_from_features(unit, cfg.sigma2, set.size()).values;
  std::vector<std::string> text(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) text[i] = print(corpus[i]);

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(cfg.seed ^ 0x1f83d9abfb41bd6bULL));
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t anchors = std::min(cfg.per_category, corpus.size());

  std::vector<FormulaPair> out;
  for (std::size_t k = 0; k < anchors; ++k) {
    Rng r = substream(cfg.seed, k);
    out.push_back({corpus[order[k]], make_equivalent_variant(corpus[order[k]], aug, r), PairCategory::equivalent});
  }
  for (std::size_t k = 0, tries = 0; k < anchors && tries < 100 * anchors; ++tries) {
    const auto i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<long>(corpus.size()) - 1));
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<long>(corpus.size()) - 1));
    if (i == j || K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= cfg.non_equivalent_max_kernel) continue;
    out.push_back({corpus[i], corpus[j], PairCategory::non_equivalent});
    ++k;
  }
  std::vector<std::pair<std::size_t, std::size_t>> hard(anchors, {0, 0});
  std::vector<std::size_t> best(anchors, std::numeric_limits<std::size_t>::max());
  parallel_for(anchors, [&](std::size_t k) {
    const std::size_t i = order[k];
    for (std::size_t j = 0; j < corpus.size(); ++j) {
      if (j == i || K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= cfg.hard_negative_max_kernel) continue;
      const std::size_t d = levenshtein(text[i], text[j]);
      if (d < best[k]) {
        best[k] = d;
        hard[k] = {i, j};
      }
    }
  });
  for (std::size_t k = 0; k < anchors; ++k) {
    if (best[k] != std::numeric_limits<std::size_t>::max()) {
      out.push_back({corpus[hard[k].first], corpus[hard[k].second], PairCategory::lexically_similar});
    }
  }
  return out;
}

inline void save_pairs(const std::vector<FormulaPair>& pairs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write pairs file: " + path);
  for (const auto& p : pairs) {
    nlohmann::json j{{"category", category_name(p.category)}, {"a", print(p.a)}, {"b", print(p.b)}};
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path);
}

inline std::vector<FormulaPair> load_pairs(const std::string& path, int num_vars = kMaxVars) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open pairs file: " + path);
  std::vector<FormulaPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      pairs.push_back({parse(j.at("a").get<std::string>(), num_vars), parse(j.at("b").get<std::string>(), num_vars),
                       parse_category(j.at("category").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::io, path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.kind(), path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pairs;
}

inline nlohmann::json to_json(const AgreementReport& rep) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t k = 0; k < kPairCategoryCount; ++k) {
    const auto& c = rep.categories[k];
    j.push_back({{"category", category_name(static_cast<PairCategory>(k))},
                 {"pairs", c.pairs},
                 {"neural_similarity", c.neural},
                 {"kernel_similarity", c.kernel},
                 {"mae", c.mae},
                 {"relative_neural_distance", c.neural_distance},
                 {"relative_kernel_distance", c.kernel_distance}});
  }
  return j;
}

inline std::string format_table(const AgreementReport& rep) {
  std::string out = "category            pairs  neural  kernel     MAE  rel.dist(n)  rel.dist(k)\n";
  for (std::size_t k = 0; k < kPairCategoryCount; ++k) {
    const auto& c = rep.categories[k];
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-18s %6zu  %6.3f  %6.3f  %6.3f  %11.3f  %11.3f\n",
                  std::string(category_name(static_cast<PairCategory>(k))).c_str(), c.pairs, c.neural, c.kernel, c.mae,
                  c.neural_distance, c.kernel_distance);
    out += buf;
  }
  return out;
}

// ---- regression probes -------------------------------------------------------

struct ProbeTargets {
  Eigen::VectorXd avg_robustness;
  Eigen::VectorXd sat_probability;
};

/// Mean robustness and satisfaction frequency over the set. A zero robustness
/// counts as satisfied exactly when `satisfies` says so.
inline ProbeTargets compute_targets(const std::vector<Formula>& formulae, const TrajectorySet& set) {
  if (set.size() == 0) throw Error(ErrorKind::validation, "targets need a non-empty trajectory set");
  const Eigen::MatrixXd rho = robustness_matrix(formulae, set);
  ProbeTargets t;
  t.avg_robustness = rho.rowwise().mean();
  t.sat_probability.resize(rho.rows());
  parallel_for(formulae.size(), [&](std::size_t i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::size_t sat = 0;
    for (Eigen::Index s = 0; s < rho.cols(); ++s) {
      const double v = rho(r, s);
      if (v > 0.0 || (v == 0.0 && satisfies(formulae[i], set[static_cast<std::size_t>(s)]))) ++sat;
    }
    t.sat_probability(r) = static_cast<double>(sat) / static_cast<double>(rho.cols());
  });
  return t;
}

enum class ProbeTarget { avg_robustness, sat_probability };
enum class FeatureSource { neural, kernel };

inline std::string_view target_name(ProbeTarget t) {
  return t == ProbeTarget::avg_robustness ? "avg_robustness" : "sat_probability";
}
inline std::string_view source_name(FeatureSource s) { return s == FeatureSource::neural ? "neural" : "kernel"; }

inline ProbeTarget parse_target(std::string_view s) {
  if (s == "robustness" || s == "avg_robustness") return ProbeTarget::avg_robustness;
  if (s == "satisfaction" || s == "sat_probability") return ProbeTarget::sat_probability;
  throw Error(ErrorKind::config, "unknown probe target: " + std::string(s));
}

inline constexpr int kMinProbeHidden = 8;

struct ProbeConfig {
  int hidden = 0;  // 0: input dim / 2, at least kMinProbeHidden
  int epochs = 300;
  int batch = 64;
  double lr = 1e-3;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    require(hidden >= 0, ErrorKind::config, "probe hidden width must be >= 0");
    require(epochs >= 1 && batch >= 1, ErrorKind::config, "probe epochs and batch must be >= 1");
    require(lr > 0.0, ErrorKind::config, "probe learning rate must be > 0");
    require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::config, "probe test fraction must be in (0, 1)");
  }
};

struct ProbeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline ProbeSplit probe_split(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (n < 2) throw Error(ErrorKind::validation, "probe needs at least 2 formulae");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed(seed ^ 0x6a09e667f3bcc909ULL));
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_test =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(n))), 1, n - 1);
  ProbeSplit s;
  s.test.assign(idx.begin(), idx.begin() + static_cast<long>(n_test));
  s.train.assign(idx.begin() + static_cast<long>(n_test), idx.end());
  return s;
}

struct ProbeReport {
  ProbeTarget target = ProbeTarget::avg_robustness;
  FeatureSource source = FeatureSource::neural;
  double r = 0.0;
  double mae = 0.0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(ErrorKind::validation, "pearson: need two equal-length vectors");
  const Eigen::ArrayXd x = a.array() - a.mean();
  const Eigen::ArrayXd y = b.array() - b.mean();
  const double den = std::sqrt((x * x).sum() * (y * y).sum());
  if (!(den > 0.0)) return 0.0;
  return std::clamp((x * y).sum() / den, -1.0, 1.0);
}

/// Two-layer MLP (GELU hidden layer of width in/2, MSE) trained with Adam on
/// standardized inputs and targets; r and MAE are measured on the test split.
inline ProbeReport train_probe(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets, const ProbeSplit& split,
                               const ProbeConfig& cfg = {}) {
  cfg.validate();
  if (features.rows() != targets.size()) throw Error(ErrorKind::validation, "probe: features and targets differ in length");
  if (split.train.empty() || split.test.empty()) throw Error(ErrorKind::validation, "probe: empty train or test split");
  if (!features.allFinite() || !targets.allFinite()) throw Error(ErrorKind::numeric, "probe: non-finite input");
  const Eigen::Index in = features.cols();
  const Eigen::Index hidden = cfg.hidden > 0 ? cfg.hidden : std::max<Eigen::Index>(kMinProbeHidden, in / 2);
  auto take = [&](const std::vector<std::size_t>& idx, Eigen::MatrixXd& X, Eigen::VectorXd& y) {
    X.resize(static_cast<Eigen::Index>(idx.size()), in);
    y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      X.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(idx[i]));
      y(static_cast<Eigen::Index>(i)) = targets(static_cast<Eigen::Index>(idx[i]));
    }
  };
  Eigen::MatrixXd Xtr, Xte;
  Eigen::VectorXd ytr, yte;
  take(split.train, Xtr, ytr);
  take(split.test, Xte, yte);

  const double y_mean = ytr.mean();
  const double y_std = std::sqrt((ytr.array() - y_mean).square().mean());
  if (!(y_std > 1e-12)) throw Error(ErrorKind::degenerate, "probe: targets have zero variance");
  const Eigen::RowVectorXd x_mean = Xtr.colwise().mean();
  Eigen::RowVectorXd x_std = ((Xtr.rowwise() - x_mean).array().square().colwise().mean()).sqrt();
  for (Eigen::Index c = 0; c < in; ++c) {
    if (!(x_std(c) > 1e-12)) x_std(c) = 1.0;
  }
  auto standardize = [&](const Eigen::MatrixXd& X) -> Eigen::MatrixXd {
    return ((X.rowwise() - x_mean).array().rowwise() / x_std.array()).matrix();
  };
  const Eigen::MatrixXd Ztr = standardize(Xtr);
  const Eigen::MatrixXd Zte = standardize(Xte);
  const Eigen::VectorXd ttr = (ytr.array() - y_mean) / y_std;

  Rng rng(mix_seed(cfg.seed ^ 0xbb67ae8584caa73bULL));
  ParamList<double> params(4);
  params[0].resize(in, hidden);
  params[1] = Eigen::MatrixXd::Zero(1, hidden);
  params[2].resize(hidden, 1);
  params[3] = Eigen::MatrixXd::Zero(1, 1);
  for (int p : {0, 2}) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(params[static_cast<std::size_t>(p)].rows()));
    for (Eigen::Index i = 0; i < params[static_cast<std::size_t>(p)].size(); ++i) {
      params[static_cast<std::size_t>(p)].data()[i] = normal(rng, 0.0, sd);
    }
  }
  AdamWConfig oc;
  oc.lr = cfg.lr;
  oc.weight_decay = 0.0;
  AdamW<double> opt(params, oc);

  auto predict = [&](const Eigen::MatrixXd& Z) -> Eigen::VectorXd {
    const Eigen::MatrixXd h = ((Z * params[0]).rowwise() + params[1].row(0)).unaryExpr([](double v) { return detail::gelu(v); });
    return ((h * params[2]).array() + params[3](0, 0)).matrix();
  };

  std::vector<Eigen::Index> order(static_cast<std::size_t>(Ztr.rows()));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t len = std::min(static_cast<std::size_t>(cfg.batch), order.size() - start);
      Eigen::MatrixXd Z(static_cast<Eigen::Index>(len), in);
      Eigen::VectorXd t(static_cast<Eigen::Index>(len));
      for (std::size_t i = 0; i < len; ++i) {
        Z.row(static_cast<Eigen::Index>(i)) = Ztr.row(order[start + i]);
        t(static_cast<Eigen::Index>(i)) = ttr(order[start + i]);
      }
      const Eigen::MatrixXd pre = (Z * params[0]).rowwise() + params[1].row(0);
      const Eigen::MatrixXd h = pre.unaryExpr([](double v) { return detail::gelu(v); });
      const Eigen::VectorXd yhat = ((h * params[2]).array() + params[3](0, 0)).matrix();
      const Eigen::VectorXd dy = (2.0 / static_cast<double>(len)) * (yhat - t);
      ParamList<double> g(4);
      g[2] = h.transpose() * dy;
      g[3] = Eigen::MatrixXd::Constant(1, 1, dy.sum());
      const Eigen::MatrixXd dpre = (dy * params[2].transpose()).cwiseProduct(pre.unaryExpr([](double v) { return detail::gelu_grad(v); }));
      g[0] = Z.transpose() * dpre;
      g[1] = dpre.colwise().sum();
      opt.step(params, g);
    }
  }

  const Eigen::VectorXd pred = (predict(Zte).array() * y_std + y_mean).matrix();
  ProbeReport rep;
  rep.r = pearson(pred, yte);
  rep.mae = (pred - yte).cwiseAbs().mean();
  rep.train_size = split.train.size();
  rep.test_size = split.test.size();
  return rep;
}

/// Kernel baseline features: Gram rows of every formula against the anchors.
inline Eigen::MatrixXd kernel_features(const std::vector<Formula>& formulae, const std::vector<Formula>& anchors,
                                       const TrajectorySet& set, double sigma2 = kDefaultSigma2) {
  if (anchors.empty()) throw Error(ErrorKind::validation, "kernel features need at least one anchor");
  const Eigen::MatrixXd u = normalized_rows(robustness_matrix(formulae, set));
  const Eigen::MatrixXd a = normalized_rows(robustness_matrix(anchors, set));
  const Eigen::MatrixXd cos = u * a.transpose();
  return cos.unaryExpr([&](double c) { return rbf(std::clamp(c, -1.0, 1.0), sigma2); });
}

inline nlohmann::json to_json(const ProbeReport& rep) {
  return {{"target", target_name(rep.target)}, {"features", source_name(rep.source)}, {"r", rep.r},
          {"mae", rep.mae},  {"train", rep.train_size},           {"test", rep.test_size}};
}

inline std::string format_table(const ProbeReport& rep) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "target=%s features=%s r=%.4f MAE=%.4f (train %zu, test %zu)\n",
                std::string(target_name(rep.target)).c_str(), std::string(source_name(rep.source)).c_str(), rep.r,
                rep.mae, rep.train_size, rep.test_size);
  return buf;
}

// ---- nearest-neighbour inversion ----------------------------------------------

struct Neighbor {
  std::size_t index = 0;
  double similarity = 0.0;
};

/// Top-k corpus rows by cosine with the query, descending; ties keep corpus order.
inline std::vector<Neighbor> invert_nn(const Eigen::RowVectorXd& query, const Eigen::MatrixXd& corpus, std::size_t top_k) {
  if (corpus.rows() == 0) throw Error(ErrorKind::validation, "nearest neighbour: empty corpus");
  if (query.size() != corpus.cols()) throw Error(ErrorKind::validation, "nearest neighbour: dimension mismatch");
  if (top_k > static_cast<std::size_t>(corpus.rows())) {
    throw Error(ErrorKind::validation, "nearest neighbour: k = " + std::to_string(top_k) + " exceeds corpus size " +
                                           std::to_string(corpus.rows()));
  }
  const double qn = query.norm();
  if (!(qn > 0.0)) throw Error(ErrorKind::degenerate, "nearest neighbour: zero query");
  std::vector<Neighbor> all(static_cast<std::size_t>(corpus.rows()));
  for (Eigen::Index i = 0; i < corpus.rows(); ++i) {
    const double cn = corpus.row(i).norm();
    all[static_cast<std::size_t>(i)] = {static_cast<std::size_t>(i), cn > 0.0 ? corpus.row(i).dot(query) / (cn * qn) : 0.0};
  }
  std::stable_sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) { return a.similarity > b.similarity; });
  all.resize(top_k);
  return all;
}

}  // namespace stlenc
