#pragma once

// Kernel-weighted alignment loss and the training metrics.

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <string>

#include "stlenc/error.hpp"

namespace stlenc {

struct LossConfig {
  double gamma = 2.0;
  double clamp = 5.0;
  bool include_diagonal = true;

  void validate() const {
    require(gamma >= 0.0 && std::isfinite(gamma), ErrorKind::config, "gamma must be >= 0");
    require(clamp >= 1.0, ErrorKind::config, "weight clamp C must be >= 1");
  }
};

struct LossResult {
  double value = 0.0;
  Eigen::MatrixXd grad;     // dL/dE, B x D
  Eigen::MatrixXd weights;  // w_ij (zero on excluded pairs)
};

/// Focal weights w_ij = min(|r_ij|^gamma / mean|r|^gamma, C) over the pair set.
inline Eigen::MatrixXd focal_weights(const Eigen::MatrixXd& residual, const LossConfig& cfg) {
  const Eigen::Index b = residual.rows();
  Eigen::MatrixXd p = residual.cwiseAbs().array().pow(cfg.gamma).matrix();
  if (!cfg.include_diagonal) p.diagonal().setZero();
  const double pairs = cfg.include_diagonal ? static_cast<double>(b * b) : static_cast<double>(b * (b - 1));
  const double mean = pairs > 0 ? p.sum() / pairs : 0.0;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(b, b);
  if (mean > 0.0) w = (p / mean).cwiseMin(cfg.clamp);
  if (!cfg.include_diagonal) w.diagonal().setZero();
  return w;
}

/// L = (1/B^2) sum_ij w_ij (K_ij - S_ij)^2 with S = E E^T. The weights are
/// constants for differentiation, so dL/dE = -(4/B^2) (w o (K - S)) E.
inline LossResult alignment_loss(const Eigen::MatrixXd& E, const Eigen::MatrixXd& K, const LossConfig& cfg = {}) {
  cfg.validate();
  const Eigen::Index b = E.rows();
  if (K.rows() != b || K.cols() != b) {
    throw Error(ErrorKind::validation, "loss: kernel is " + std::to_string(K.rows()) + "x" + std::to_string(K.cols()) +
                                           " but batch has " + std::to_string(b) + " rows");
  }
  if (!E.allFinite() || !K.allFinite()) throw Error(ErrorKind::numeric, "loss: non-finite input");
  const Eigen::MatrixXd S = E * E.transpose();
  const Eigen::MatrixXd r = K - S;
  LossResult out;
  out.weights = focal_weights(r, cfg);
  const double inv_b2 = 1.0 / static_cast<double>(b * b);
  const Eigen::MatrixXd wr = out.weights.cwiseProduct(r);
  out.value = inv_b2 * wr.cwiseProduct(r).sum();
  // dL/dS = -2 w r / B^2 (symmetric), dS = dE E^T + E dE^T
  out.grad = (-4.0 * inv_b2) * (wr * E);
  return out;
}

/// Cosine between vec(K) and vec(S).
inline double kernel_alignment(const Eigen::MatrixXd& K, const Eigen::MatrixXd& S) {
  if (K.rows() != S.rows() || K.cols() != S.cols()) throw Error(ErrorKind::validation, "alignment: shape mismatch");
  const double nk = K.norm();
  const double ns = S.norm();
  if (!(nk > 0.0) || !(ns > 0.0)) throw Error(ErrorKind::degenerate, "alignment: zero matrix");
  return K.cwiseProduct(S).sum() / (nk * ns);
}

/// log of the mean over ordered pairs i != j of exp(-2 |z_i - z_j|^2).
inline double uniformity(const Eigen::MatrixXd& E) {
  const Eigen::Index b = E.rows();
  if (b < 2) throw Error(ErrorKind::validation, "uniformity needs at least 2 rows");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < b; ++j) {
      if (i != j) acc += std::exp(-2.0 * (E.row(i) - E.row(j)).squaredNorm());
    }
  }
  return std::log(acc / static_cast<double>(b * (b - 1)));
}

struct Metrics {
  double loss = 0.0;
  double alignment = 0.0;
  double uniformity = 0.0;
};

inline Metrics batch_metrics(const Eigen::MatrixXd& E, const Eigen::MatrixXd& K, const LossConfig& cfg = {}) {
  Metrics m;
  m.loss = alignment_loss(E, K, cfg).value;
  m.alignment = kernel_alignment(K, E * E.transpose());
  m.uniformity = uniformity(E);
  return m;
}

struct MetricRow {
  long step = 0;
  std::string split;
  Metrics metrics;
};

inline std::string format_metric_row(const MetricRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%ld,%s,%.17g,%.17g,%.17g", r.step, r.split.c_str(), r.metrics.loss,
                r.metrics.alignment, r.metrics.uniformity);
  return buf;
}

inline constexpr const char* kMetricHeader = "step,split,loss,alignment,uniformity";

/// Append-only metric log; writes the header when the file is new or empty.
class MetricLog {
 public:
  explicit MetricLog(const std::string& path) : path_(path) {
    std::ifstream probe(path);
    const bool fresh = !probe || probe.peek() == std::char_traits<char>::eof();
    out_.open(path, std::ios::app);
    if (!out_) throw Error(ErrorKind::io, "cannot open metric log: " + path);
    if (fresh) out_ << kMetricHeader << '\n';
  }

  void append(const MetricRow& r) {
    out_ << format_metric_row(r) << '\n';
    out_.flush();
    if (!out_) throw Error(ErrorKind::io, "write failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace stlenc
