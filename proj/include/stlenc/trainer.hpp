#pragma once

// Distillation loop: the teacher Gram is computed per effective batch from
// cached, unit-normalized robustness rows; micro-batches re-run the encoder
// on their slice and accumulate gradients until the optimizer step.

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stlenc/augment.hpp"
#include "stlenc/encoder.hpp"
#include "stlenc/kernel.hpp"
#include "stlenc/objective.hpp"
#include "stlenc/optimizer.hpp"

namespace stlenc {

struct TrainConfig {
  int epochs = 10;
  int micro_batch = 32;
  int accumulation = 2;
  long max_steps = 0;  // 0: no cap
  AdamWConfig optimizer;
  LossConfig loss;
  double sigma2 = kDefaultSigma2;
  double val_fraction = 0.1;
  int checkpoint_every = 1;  // epochs
  std::uint64_t seed = 0;

  int effective_batch() const { return micro_batch * accumulation; }

  void validate() const {
    require(epochs >= 1, ErrorKind::config, "epochs must be >= 1");
    require(micro_batch >= 1 && accumulation >= 1, ErrorKind::config, "micro_batch and accumulation must be >= 1");
    require(effective_batch() >= 2, ErrorKind::config, "effective batch must be >= 2");
    require(max_steps >= 0, ErrorKind::config, "max_steps must be >= 0");
    require(sigma2 > 0.0, ErrorKind::config, "sigma2 must be > 0");
    require(val_fraction >= 0.0 && val_fraction < 1.0, ErrorKind::config, "val_fraction must be in [0, 1)");
    require(checkpoint_every >= 1, ErrorKind::config, "checkpoint_every must be >= 1");
    optimizer.validate();
    loss.validate();
  }
};

/// Train/validation partition by seed_id: all variants of a seed share a side.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

inline Split split_by_seed(const std::vector<DatasetRecord>& records, double val_fraction, std::uint64_t seed) {
  std::vector<std::int64_t> ids;
  {
    std::set<std::int64_t> unique;
    for (const auto& r : records) unique.insert(r.seed_id);
    ids.assign(unique.begin(), unique.end());
  }
  Rng rng(mix_seed(seed ^ 0x5b1d7a3e9f0c2468ULL));
  std::shuffle(ids.begin(), ids.end(), rng);
  auto n_val = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(ids.size())));
  if (val_fraction > 0.0 && ids.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, ids.size() - 1);
  else n_val = 0;
  const std::set<std::int64_t> val_ids(ids.begin(), ids.begin() + static_cast<long>(n_val));
  Split s;
  for (std::size_t i = 0; i < records.size(); ++i) (val_ids.count(records[i].seed_id) ? s.val : s.train).push_back(i);
  return s;
}

/// Teacher features: one unit-norm robustness row per formula.
struct TeacherFeatures {
  Eigen::MatrixXd unit_rows;
  std::size_t signals = 0;

  GramMatrix gram(const std::vector<std::size_t>& idx, double sigma2) const {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(idx.size()), unit_rows.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = unit_rows.row(static_cast<Eigen::Index>(idx[i]));
    std::vector<std::int64_t> ids(idx.begin(), idx.end());
    return gram_from_features(rows, sigma2, signals, std::move(ids));
  }
};

inline TeacherFeatures teacher_features(const std::vector<Formula>& formulae, const TrajectorySet& set) {
  std::vector<std::int64_t> ids(formulae.size());
  std::iota(ids.begin(), ids.end(), 0);
  return {normalized_rows(robustness_matrix(formulae, set), ids), set.size()};
}

/// Metrics of `enc` against the teacher over the whole given set as one batch.
template <class S>
Metrics evaluate(const Encoder<S>& enc, const std::vector<TokenSequence>& tokens, const GramMatrix& K,
                 const LossConfig& loss = {}) {
  if (tokens.size() < 2) throw Error(ErrorKind::validation, "evaluate needs at least 2 formulae");
  const Eigen::MatrixXd E = enc.embed(tokens).template cast<double>();
  return batch_metrics(E, K.values, loss);
}

template <class S>
Metrics evaluate(const Encoder<S>& enc, const std::vector<Formula>& formulae, const TrajectorySet& set,
                 double sigma2 = kDefaultSigma2, const LossConfig& loss = {}) {
  if (formulae.size() < 2) throw Error(ErrorKind::validation, "evaluate needs at least 2 formulae");
  return evaluate(enc, enc.tokenize(formulae), gram(formulae, set, sigma2), loss);
}

struct TrainResult {
  Encoder<float> final_model;
  Encoder<float> best_model;
  double best_val_alignment = -2.0;
  std::vector<MetricRow> log;
  Split split;
  long steps = 0;
};

struct TrainOutputs {
  std::string dir;  // empty: nothing written
};

namespace detail {

inline std::string nonfinite_diagnostic(long step, const Eigen::MatrixXd& E, const GramMatrix& K) {
  for (Eigen::Index i = 0; i < E.rows(); ++i) {
    if (!E.row(i).allFinite()) return "step " + std::to_string(step) + ": non-finite embedding for formula " + std::to_string(K.ids[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index i = 0; i < K.size(); ++i) {
    for (Eigen::Index j = 0; j < K.size(); ++j) {
      const double s = E.row(i).dot(E.row(j));
      if (!std::isfinite(K(i, j)) || !std::isfinite(s)) {
        return "step " + std::to_string(step) + ": non-finite pair (" + std::to_string(K.ids[static_cast<std::size_t>(i)]) +
               ", " + std::to_string(K.ids[static_cast<std::size_t>(j)]) + ")";
      }
    }
  }
  return "step " + std::to_string(step) + ": non-finite loss";
}

}  // namespace detail

/// One optimizer step on the effective batch `idx`. Returns the batch
/// metrics (computed before the update).
template <class S>
Metrics train_step(Encoder<S>& enc, AdamW<S>& opt, const std::vector<TokenSequence>& tokens,
                   const TeacherFeatures& teacher, const std::vector<std::size_t>& idx, const TrainConfig& cfg,
                   long step) {
  const GramMatrix K = teacher.gram(idx, cfg.sigma2);
  std::vector<TokenSequence> batch;
  batch.reserve(idx.size());
  for (std::size_t i : idx) batch.push_back(tokens[i]);

  Eigen::MatrixXd E;
  try {
    E = enc.embed(batch).template cast<double>();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::numeric) throw;
    std::string ids;
    for (std::size_t i : idx) ids += (ids.empty() ? "" : ",") + std::to_string(i);
    throw Error(ErrorKind::numeric, "step " + std::to_string(step) + ": " + e.what() + " (batch formula ids " + ids + ")");
  }
  if (!E.allFinite()) throw Error(ErrorKind::numeric, detail::nonfinite_diagnostic(step, E, K));
  const LossResult lr = alignment_loss(E, K.values, cfg.loss);
  if (!std::isfinite(lr.value)) throw Error(ErrorKind::numeric, detail::nonfinite_diagnostic(step, E, K));
  Metrics m;
  m.loss = lr.value;
  m.alignment = kernel_alignment(K.values, E * E.transpose());
  m.uniformity = uniformity(E);

  ParamList<S> grads = zeros_like(enc.params());
  const std::size_t micro = static_cast<std::size_t>(cfg.micro_batch);
  for (std::size_t start = 0; start < batch.size(); start += micro) {
    const std::size_t len = std::min(micro, batch.size() - start);
    std::vector<TokenSequence> slice(batch.begin() + static_cast<long>(start), batch.begin() + static_cast<long>(start + len));
    auto fwd = enc.forward(slice);
    const Mat<S> dE = lr.grad.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)).template cast<S>();
    add_into(grads, enc.backward(fwd.tape, dE));
  }
  opt.step(enc.params(), grads);
  return m;
}

/// Epoch-wise training with per-step train metrics and per-epoch validation.
/// Writes metrics.csv, last.stle (+ last.stlo optimizer state) and best.stle
/// into outputs.dir when set.
inline TrainResult train(const std::vector<DatasetRecord>& records, const TrajectorySet& set,
                         const EncoderConfig& enc_cfg, const TrainConfig& cfg, const TrainOutputs& outputs = {},
                         const std::function<void(const MetricRow&)>& on_row = {}) {
  cfg.validate();
  enc_cfg.validate();
  if (records.size() < 2) throw Error(ErrorKind::validation, "training needs at least 2 formulae");

  TrainResult result;
  result.split = split_by_seed(records, cfg.val_fraction, cfg.seed);
  const auto& train_idx = result.split.train;
  const auto& val_idx = result.split.val;
  if (train_idx.size() < static_cast<std::size_t>(cfg.effective_batch())) {
    throw Error(ErrorKind::validation, "training split (" + std::to_string(train_idx.size()) +
                                           ") smaller than the effective batch (" +
                                           std::to_string(cfg.effective_batch()) + ")");
  }

  const std::vector<Formula> formulae = formulae_of(records);
  TeacherFeatures teacher;
  try {
    teacher = teacher_features(formulae, set);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("teacher kernel: ") + e.what());
  }
  Encoder<float> enc(enc_cfg);
  const std::vector<TokenSequence> tokens = enc.tokenize(formulae);
  AdamW<float> opt(enc.params(), cfg.optimizer);

  std::optional<MetricLog> log;
  if (!outputs.dir.empty()) {
    std::filesystem::create_directories(outputs.dir);
    std::filesystem::remove(outputs.dir + "/metrics.csv");
    log.emplace(outputs.dir + "/metrics.csv");
  }
  auto emit = [&](MetricRow row) {
    if (log) log->append(row);
    if (on_row) on_row(row);
    result.log.push_back(std::move(row));
  };

  std::vector<TokenSequence> val_tokens;
  for (std::size_t i : val_idx) val_tokens.push_back(tokens[i]);
  const std::optional<GramMatrix> val_gram =
      val_idx.size() >= 2 ? std::optional<GramMatrix>(teacher.gram(val_idx, cfg.sigma2)) : std::nullopt;

  result.best_model = enc;
  const std::size_t batch = static_cast<std::size_t>(cfg.effective_batch());
  long step = 0;
  bool done = false;
  for (int epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    Rng rng = substream(cfg.seed, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start + batch <= order.size(); start += batch) {
      std::vector<std::size_t> idx(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(start + batch));
      const Metrics m = train_step(enc, opt, tokens, teacher, idx, cfg, step);
      ++step;
      emit({step, "train", m});
      if (cfg.max_steps > 0 && step >= cfg.max_steps) {
        done = true;
        break;
      }
    }
    if (val_gram) {
      const Metrics v = evaluate(enc, val_tokens, *val_gram, cfg.loss);
      emit({step, "val", v});
      if (v.alignment > result.best_val_alignment) {
        result.best_val_alignment = v.alignment;
        result.best_model = enc;
        if (!outputs.dir.empty()) save_encoder(enc, outputs.dir + "/best.stle");
      }
    }
    if (!outputs.dir.empty() && ((epoch + 1) % cfg.checkpoint_every == 0 || done || epoch + 1 == cfg.epochs)) {
      save_encoder(enc, outputs.dir + "/last.stle");
      opt.save(outputs.dir + "/last.stlo");
    }
  }
  if (!val_gram) {
    result.best_model = enc;
    if (!outputs.dir.empty()) save_encoder(enc, outputs.dir + "/best.stle");
  }
  result.final_model = std::move(enc);
  result.steps = step;
  return result;
}

/// Means of consecutive non-overlapping windows (a trailing partial window is dropped).
inline std::vector<double> block_means(const std::vector<double>& xs, std::size_t window) {
  std::vector<double> out;
  for (std::size_t s = 0; s + window <= xs.size(); s += window) {
    out.push_back(std::accumulate(xs.begin() + static_cast<long>(s), xs.begin() + static_cast<long>(s + window), 0.0) /
                  static_cast<double>(window));
  }
  return out;
}

}  // namespace stlenc
