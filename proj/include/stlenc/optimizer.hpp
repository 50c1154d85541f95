#pragma once

// AdamW with decoupled weight decay.

#include <cmath>
#include <string>

#include "stlenc/encoder.hpp"

namespace stlenc {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const {
    require(lr >= 0.0 && std::isfinite(lr), ErrorKind::config, "learning rate must be >= 0");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::config, "betas must be in [0,1)");
    require(eps > 0.0, ErrorKind::config, "eps must be > 0");
    require(weight_decay >= 0.0, ErrorKind::config, "weight decay must be >= 0");
  }
};

template <class S>
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ParamList<S>& like, const AdamWConfig& cfg) : cfg_(cfg), m_(zeros_like(like)), v_(zeros_like(like)) {
    cfg_.validate();
  }

  long step_count() const { return t_; }
  const ParamList<S>& first_moment() const { return m_; }
  const ParamList<S>& second_moment() const { return v_; }

  /// One update. Weight decay applies to matrices only (not biases, gains).
  void step(ParamList<S>& params, const ParamList<S>& grads) {
    if (grads.size() != params.size() || m_.size() != params.size()) {
      throw Error(ErrorKind::validation, "optimizer: parameter/gradient count mismatch");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const S b1 = static_cast<S>(cfg_.beta1);
    const S b2 = static_cast<S>(cfg_.beta2);
    const S lr = static_cast<S>(cfg_.lr);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      const auto& g = grads[i];
      m_[i] = b1 * m_[i] + (S(1) - b1) * g;
      v_[i] = b2 * v_[i] + (S(1) - b2) * g.cwiseProduct(g);
      if (p.rows() > 1 && cfg_.weight_decay > 0.0) p -= (lr * static_cast<S>(cfg_.weight_decay)) * p;
      const auto mhat = m_[i].array() / static_cast<S>(c1);
      const auto vhat = v_[i].array() / static_cast<S>(c2);
      p.array() -= lr * mhat / (vhat.sqrt() + static_cast<S>(cfg_.eps));
    }
  }

  // "STLO", u32 version, i64 step, u32 count, then m and v tensors as f32.
  void save(const std::string& path) const {
    BinaryWriter w(path);
    w.magic("STLO");
    w.put<std::uint32_t>(1);
    w.put<std::int64_t>(t_);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m_.size()));
    for (const auto* list : {&m_, &v_}) {
      for (const auto& m : *list) {
        w.put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
        w.put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          for (Eigen::Index c = 0; c < m.cols(); ++c) w.put<float>(static_cast<float>(m(r, c)));
        }
      }
    }
    w.finish();
  }

  void load(const std::string& path) {
    BinaryReader r(path);
    r.expect_magic("STLO");
    if (r.get<std::uint32_t>() != 1) throw Error(ErrorKind::io, "unsupported optimizer state version: " + path);
    t_ = r.get<std::int64_t>();
    if (r.get<std::uint32_t>() != m_.size()) throw Error(ErrorKind::io, "optimizer state tensor count mismatch");
    for (auto* list : {&m_, &v_}) {
      for (auto& m : *list) {
        if (r.get<std::uint64_t>() != static_cast<std::uint64_t>(m.rows()) ||
            r.get<std::uint64_t>() != static_cast<std::uint64_t>(m.cols())) {
          throw Error(ErrorKind::io, "optimizer state shape mismatch: " + path);
        }
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
          for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<S>(r.get<float>());
        }
      }
    }
  }

 private:
  AdamWConfig cfg_;
  ParamList<S> m_;
  ParamList<S> v_;
  long t_ = 0;
};

}  // namespace stlenc
