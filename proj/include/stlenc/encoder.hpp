#pragma once

// Student encoder: token + learned positional embeddings, pre-norm
// Transformer blocks, a final LayerNorm, pooling, a bottleneck projector
// z = W2 LN(GELU(W1 e + b1)) + b2, and L2 normalization.
//
// Each sequence is processed at its valid length. With a key mask this is the
// same computation as attending over the padded sequence (padded keys get
// weight 0) and it never touches padded positions, so their embedding rows
// receive no gradient.
//
// Row-vector convention throughout: activations are (tokens x features) and
// a linear layer is Y = X W + b.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "stlenc/binary_io.hpp"
#include "stlenc/parallel.hpp"
#include "stlenc/rng.hpp"
#include "stlenc/tokenizer.hpp"

namespace stlenc {

enum class Pooling { cls, bos, mean };

inline std::string_view pooling_name(Pooling p) {
  switch (p) {
    case Pooling::cls: return "cls";
    case Pooling::bos: return "bos";
    case Pooling::mean: return "mean";
  }
  return "?";
}

inline Pooling parse_pooling(std::string_view s) {
  if (s == "cls") return Pooling::cls;
  if (s == "bos") return Pooling::bos;
  if (s == "mean") return Pooling::mean;
  throw Error(ErrorKind::config, "unknown pooling '" + std::string(s) + "' (expected cls, bos or mean)");
}

/// Aggregation token placed at position 0; mean pooling reuses [BOS].
inline AggToken agg_token(Pooling p) { return p == Pooling::cls ? AggToken::cls : AggToken::bos; }

struct EncoderConfig {
  int vocab = kVocabSize;
  int d_model = 64;
  int layers = 2;
  int heads = 4;
  int ff_dim = 128;
  int max_len = 128;
  Pooling pooling = Pooling::cls;
  int out_dim = 64;
  std::uint64_t seed = 0;

  int head_dim() const { return d_model / heads; }
  int bottleneck() const { return d_model / 2; }

  void validate() const {
    require(vocab >= kVocabSize, ErrorKind::config, "vocab smaller than the token set");
    require(d_model >= 2 && heads >= 1 && d_model % heads == 0, ErrorKind::config,
            "d_model must be divisible by heads");
    require(d_model % 2 == 0, ErrorKind::config, "d_model must be even (bottleneck = d_model / 2)");
    require(layers >= 0 && ff_dim >= 1, ErrorKind::config, "bad layer/ff sizes");
    require(max_len >= 3, ErrorKind::config, "max_len must be >= 3");
    require(out_dim >= 2, ErrorKind::config, "out_dim must be >= 2");
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using ColVec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Parameter (or gradient) tensors in a fixed order; biases and gains are
/// 1 x n matrices.
template <class S>
using ParamList = std::vector<Mat<S>>;

namespace param {
// per-layer offsets
enum : int { ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2, per_layer };
// tail offsets after the layers
enum : int { lnf_g, lnf_b, p1, pb1, pln_g, pln_b, p2, pb2, tail };
inline constexpr int tok = 0;
inline constexpr int pos = 1;
inline int layer(int l, int offset) { return 2 + l * per_layer + offset; }
inline int tail_at(int layers, int offset) { return 2 + layers * per_layer + offset; }
inline int count(int layers) { return 2 + layers * per_layer + tail; }
}  // namespace param

inline std::vector<std::pair<int, int>> parameter_shapes(const EncoderConfig& c) {
  const int d = c.d_model;
  const int f = c.ff_dim;
  const int h = c.bottleneck();
  std::vector<std::pair<int, int>> shapes{{c.vocab, d}, {c.max_len, d}};
  for (int l = 0; l < c.layers; ++l) {
    const std::vector<std::pair<int, int>> block{{1, d}, {1, d}, {d, d}, {1, d}, {d, d}, {1, d}, {d, d}, {1, d},
                                                 {d, d}, {1, d}, {1, d}, {1, d}, {d, f}, {1, f}, {f, d}, {1, d}};
    shapes.insert(shapes.end(), block.begin(), block.end());
  }
  const std::vector<std::pair<int, int>> tail{{1, d}, {1, d}, {d, h}, {1, h}, {1, h}, {1, h}, {h, c.out_dim}, {1, c.out_dim}};
  shapes.insert(shapes.end(), tail.begin(), tail.end());
  return shapes;
}

inline std::string parameter_name(const EncoderConfig& c, int index) {
  static const char* layer_names[] = {"ln1_g", "ln1_b", "wq", "bq", "wk", "bk", "wv", "bv",
                                      "wo",    "bo",    "ln2_g", "ln2_b", "w1", "b1", "w2", "b2"};
  static const char* tail_names[] = {"lnf_g", "lnf_b", "proj_w1", "proj_b1", "proj_ln_g", "proj_ln_b", "proj_w2", "proj_b2"};
  if (index == param::tok) return "tok_emb";
  if (index == param::pos) return "pos_emb";
  const int rel = index - 2;
  if (rel < c.layers * param::per_layer) {
    return "layer" + std::to_string(rel / param::per_layer) + "." + layer_names[rel % param::per_layer];
  }
  return tail_names[rel - c.layers * param::per_layer];
}

/// Average of the rows of h whose mask entry is set.
template <class S>
Mat<S> masked_mean(const Mat<S>& h, const std::vector<std::uint8_t>& mask) {
  if (static_cast<Eigen::Index>(mask.size()) != h.rows()) throw Error(ErrorKind::validation, "mask length mismatch");
  Mat<S> acc = Mat<S>::Zero(1, h.cols());
  S count = 0;
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    acc.row(0) += h.row(i);
    count += 1;
  }
  if (count == 0) throw Error(ErrorKind::validation, "mask selects no rows");
  return acc / count;
}

template <class S>
ParamList<S> zeros_like(const ParamList<S>& p) {
  ParamList<S> out;
  out.reserve(p.size());
  for (const auto& m : p) out.push_back(Mat<S>::Zero(m.rows(), m.cols()));
  return out;
}

template <class S>
void add_into(ParamList<S>& acc, const ParamList<S>& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

namespace detail {

inline constexpr double kLnEps = 1e-5;

template <class S>
struct LnCache {
  Mat<S> xhat;
  ColVec<S> rstd;
};

template <class S>
Mat<S> layer_norm(const Mat<S>& x, const Mat<S>& g, const Mat<S>& b, LnCache<S>& c) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  c.xhat.resize(n, d);
  c.rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const S mu = x.row(i).mean();
    const auto centered = (x.row(i).array() - mu).eval();
    const S var = centered.square().mean();
    const S r = S(1) / std::sqrt(var + S(kLnEps));
    c.xhat.row(i) = centered * r;
    c.rstd(i) = r;
  }
  Mat<S> y = (c.xhat.array().rowwise() * g.row(0).array()).matrix();
  y.rowwise() += b.row(0);
  return y;
}

template <class S>
Mat<S> layer_norm_backward(const Mat<S>& dy, const Mat<S>& g, const LnCache<S>& c, Mat<S>& dg, Mat<S>& db) {
  dg.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  const Mat<S> dxhat = (dy.array().rowwise() * g.row(0).array()).matrix();
  Mat<S> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const S m1 = dxhat.row(i).mean();
    const S m2 = (dxhat.row(i).array() * c.xhat.row(i).array()).mean();
    dx.row(i) = (c.rstd(i) * (dxhat.row(i).array() - m1 - c.xhat.row(i).array() * m2)).matrix();
  }
  return dx;
}

template <class S>
S gelu(S x) {
  return S(0.5) * x * (S(1) + std::erf(x / std::numbers::sqrt2_v<S>));
}

template <class S>
S gelu_grad(S x) {
  const S cdf = S(0.5) * (S(1) + std::erf(x / std::numbers::sqrt2_v<S>));
  const S pdf = std::exp(S(-0.5) * x * x) * (std::numbers::inv_sqrtpi_v<S> / std::numbers::sqrt2_v<S>);
  return cdf + x * pdf;
}

template <class S>
Mat<S> linear(const Mat<S>& x, const Mat<S>& w, const Mat<S>& b) {
  Mat<S> y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

template <class S>
void linear_backward(const Mat<S>& x, const Mat<S>& dy, Mat<S>& dw, Mat<S>& db) {
  dw.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
}

}  // namespace detail

template <class S>
struct LayerTape {
  detail::LnCache<S> ln1;
  Mat<S> a;  // LN1 output
  Mat<S> q, k, v;
  std::vector<Mat<S>> probs;  // per head, n x n attention weights
  Mat<S> o;                   // concatenated head outputs
  detail::LnCache<S> ln2;
  Mat<S> b;   // LN2 output
  Mat<S> h1;  // pre-activation of the feed-forward
  Mat<S> g;   // GELU(h1)
};

template <class S>
struct SequenceTape {
  std::vector<int> ids;
  std::vector<LayerTape<S>> layers;
  detail::LnCache<S> lnf;
  Mat<S> e;  // pooled, 1 x d
  Mat<S> u;  // projector pre-activation, 1 x d/2
  Mat<S> gu;
  detail::LnCache<S> pln;
  Mat<S> v;
  Mat<S> z;
  S znorm = 0;
  Mat<S> out;  // 1 x out_dim, unit norm
};

template <class S>
struct ForwardResult {
  Mat<S> embeddings;  // B x out_dim
  std::vector<SequenceTape<S>> tape;
};

template <class S = float>
class Encoder {
 public:
  Encoder() = default;

  explicit Encoder(const EncoderConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    init();
  }

  Encoder(const EncoderConfig& cfg, ParamList<S> params) : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    check_shapes(params_);
  }

  const EncoderConfig& config() const { return cfg_; }
  const ParamList<S>& params() const { return params_; }
  ParamList<S>& params() { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& m : params_) n += static_cast<std::size_t>(m.size());
    return n;
  }

  template <class T>
  Encoder<T> cast() const {
    ParamList<T> out;
    for (const auto& m : params_) out.push_back(m.template cast<T>());
    return Encoder<T>(cfg_, std::move(out));
  }

  TokenSequence tokenize(const Formula& f) const {
    return stlenc::tokenize(f, static_cast<std::size_t>(cfg_.max_len), agg_token(cfg_.pooling));
  }

  std::vector<TokenSequence> tokenize(const std::vector<Formula>& fs) const {
    std::vector<TokenSequence> out;
    out.reserve(fs.size());
    for (const auto& f : fs) out.push_back(tokenize(f));
    return out;
  }

  /// Embeddings plus the activation tape needed by backward().
  ForwardResult<S> forward(const std::vector<TokenSequence>& batch, bool keep_tape = true) const {
    ForwardResult<S> r;
    r.embeddings.resize(static_cast<Eigen::Index>(batch.size()), cfg_.out_dim);
    if (keep_tape) r.tape.resize(batch.size());
    parallel_for(batch.size(), [&](std::size_t i) {
      SequenceTape<S> local;
      SequenceTape<S>& t = keep_tape ? r.tape[i] : local;
      try {
        forward_one(valid_ids(batch[i], i), t);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::numeric) throw;
        throw Error(ErrorKind::numeric, "sequence " + std::to_string(i) + ": " + e.what());
      }
      r.embeddings.row(static_cast<Eigen::Index>(i)) = t.out.row(0);
    });
    return r;
  }

  Mat<S> embed(const std::vector<TokenSequence>& batch) const { return forward(batch, false).embeddings; }
  Mat<S> embed(const std::vector<Formula>& fs) const { return embed(tokenize(fs)); }

  /// Exact parameter gradients of sum_ij dE_ij * E_ij.
  ParamList<S> backward(const std::vector<SequenceTape<S>>& tape, const Mat<S>& dE) const {
    if (dE.rows() != static_cast<Eigen::Index>(tape.size()) || dE.cols() != cfg_.out_dim) {
      throw Error(ErrorKind::validation, "backward: upstream gradient shape does not match the tape");
    }
    // Fixed-size groups summed in index order keep the result independent of
    // the thread count.
    constexpr std::size_t kGroup = 8;
    const std::size_t groups = (tape.size() + kGroup - 1) / kGroup;
    std::vector<ParamList<S>> partial(groups);
    parallel_for(groups, [&](std::size_t gi) {
      partial[gi] = zeros_like(params_);
      const std::size_t end = std::min(tape.size(), (gi + 1) * kGroup);
      for (std::size_t i = gi * kGroup; i < end; ++i) {
        if (tape[i].ids.empty()) throw Error(ErrorKind::validation, "backward: tape was not recorded");
        backward_one(tape[i], dE.row(static_cast<Eigen::Index>(i)), partial[gi]);
      }
    });
    ParamList<S> grads = zeros_like(params_);
    for (const auto& p : partial) add_into(grads, p);
    return grads;
  }

 private:
  void init() {
    Rng rng(mix_seed(cfg_.seed ^ 0x3c6ef372fe94f82bULL));
    const auto shapes = parameter_shapes(cfg_);
    params_.clear();
    const double residual_scale = 1.0 / std::sqrt(2.0 * std::max(1, cfg_.layers));
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      const auto [rows, cols] = shapes[i];
      Mat<S> m(rows, cols);
      const std::string name = parameter_name(cfg_, static_cast<int>(i));
      const auto dot = name.rfind('.');
      const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
      if (leaf.ends_with("_g")) {
        m.setOnes();
      } else if (rows == 1) {
        m.setZero();
      } else {
        double stddev = (i == static_cast<std::size_t>(param::tok) || i == static_cast<std::size_t>(param::pos)) ? 0.5 : 1.0 / std::sqrt(static_cast<double>(rows));
        if (leaf == "wo" || leaf == "w2") stddev *= residual_scale;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<S>(normal(rng, 0.0, stddev));
        }
      }
      params_.push_back(std::move(m));
    }
  }

  void check_shapes(const ParamList<S>& p) const {
    const auto shapes = parameter_shapes(cfg_);
    if (p.size() != shapes.size()) throw Error(ErrorKind::validation, "parameter count does not match config");
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      if (p[i].rows() != shapes[i].first || p[i].cols() != shapes[i].second) {
        throw Error(ErrorKind::validation, "parameter " + parameter_name(cfg_, static_cast<int>(i)) +
                                               " has the wrong shape");
      }
      if (!p[i].allFinite()) {
        throw Error(ErrorKind::numeric, "parameter " + parameter_name(cfg_, static_cast<int>(i)) + " is not finite");
      }
    }
  }

  std::vector<int> valid_ids(const TokenSequence& seq, std::size_t index) const {
    const std::size_t n = seq.valid_length();
    auto fail = [&](const std::string& what) {
      throw Error(ErrorKind::validation, "sequence " + std::to_string(index) + ": " + what);
    };
    if (seq.ids.size() != seq.mask.size()) fail("ids/mask length mismatch");
    if (n == 0) fail("empty sequence");
    if (n > static_cast<std::size_t>(cfg_.max_len)) fail("longer than max_len");
    for (std::size_t j = n; j < seq.mask.size(); ++j) {
      if (seq.mask[j]) fail("mask is not a prefix");
    }
    std::vector<int> ids(seq.ids.begin(), seq.ids.begin() + static_cast<long>(n));
    for (int id : ids) {
      if (id < 0 || id >= cfg_.vocab) fail("token id outside vocabulary");
    }
    return ids;
  }

  const Mat<S>& P(int i) const { return params_[static_cast<std::size_t>(i)]; }

  void forward_one(std::vector<int> ids, SequenceTape<S>& t) const {
    using detail::layer_norm;
    using detail::linear;
    const auto n = static_cast<Eigen::Index>(ids.size());
    const int d = cfg_.d_model;
    const int dh = cfg_.head_dim();
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));

    Mat<S> x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) x.row(i) = P(param::tok).row(ids[static_cast<std::size_t>(i)]) + P(param::pos).row(i);
    t.ids = std::move(ids);
    t.layers.resize(static_cast<std::size_t>(cfg_.layers));

    for (int l = 0; l < cfg_.layers; ++l) {
      auto& L = t.layers[static_cast<std::size_t>(l)];
      auto W = [&](int off) -> const Mat<S>& { return P(param::layer(l, off)); };
      L.a = layer_norm(x, W(param::ln1_g), W(param::ln1_b), L.ln1);
      L.q = linear(L.a, W(param::wq), W(param::bq));
      L.k = linear(L.a, W(param::wk), W(param::bk));
      L.v = linear(L.a, W(param::wv), W(param::bv));
      L.o.resize(n, d);
      L.probs.resize(static_cast<std::size_t>(cfg_.heads));
      for (int h = 0; h < cfg_.heads; ++h) {
        Mat<S> s = (L.q.middleCols(h * dh, dh) * L.k.middleCols(h * dh, dh).transpose()) * scale;
        for (Eigen::Index i = 0; i < n; ++i) {
          const S m = s.row(i).maxCoeff();
          s.row(i) = (s.row(i).array() - m).exp().matrix();
          s.row(i) /= s.row(i).sum();
        }
        L.o.middleCols(h * dh, dh).noalias() = s * L.v.middleCols(h * dh, dh);
        L.probs[static_cast<std::size_t>(h)] = std::move(s);
      }
      x += linear(L.o, W(param::wo), W(param::bo));
      L.b = layer_norm(x, W(param::ln2_g), W(param::ln2_b), L.ln2);
      L.h1 = linear(L.b, W(param::w1), W(param::b1));
      L.g = L.h1.unaryExpr([](S v) { return detail::gelu(v); });
      x += linear(L.g, W(param::w2), W(param::b2));
    }

    auto T = [&](int off) -> const Mat<S>& { return P(param::tail_at(cfg_.layers, off)); };
    const Mat<S> xf = layer_norm(x, T(param::lnf_g), T(param::lnf_b), t.lnf);
    t.e = cfg_.pooling == Pooling::mean ? Mat<S>(xf.colwise().mean()) : Mat<S>(xf.row(0));
    t.u = linear(t.e, T(param::p1), T(param::pb1));
    t.gu = t.u.unaryExpr([](S v) { return detail::gelu(v); });
    t.v = layer_norm(t.gu, T(param::pln_g), T(param::pln_b), t.pln);
    t.z = linear(t.v, T(param::p2), T(param::pb2));
    t.znorm = t.z.norm();
    if (!(t.znorm > S(0)) || !std::isfinite(t.znorm)) {
      throw Error(ErrorKind::numeric, "encoder output has zero or non-finite norm");
    }
    t.out = t.z / t.znorm;
  }

  template <class Row>
  void backward_one(const SequenceTape<S>& t, const Row& dout, ParamList<S>& G) const {
    using detail::layer_norm_backward;
    using detail::linear_backward;
    const auto n = static_cast<Eigen::Index>(t.ids.size());
    const int d = cfg_.d_model;
    const int dh = cfg_.head_dim();
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    auto gT = [&](int off) -> Mat<S>& { return G[static_cast<std::size_t>(param::tail_at(cfg_.layers, off))]; };
    auto T = [&](int off) -> const Mat<S>& { return P(param::tail_at(cfg_.layers, off)); };

    // L2 normalization: dz = (I - e e^T) dout / |z|
    const Mat<S> dO = dout;
    const Mat<S> dz = (dO - t.out * (t.out.row(0).dot(dO.row(0)))) / t.znorm;
    linear_backward(t.v, dz, gT(param::p2), gT(param::pb2));
    const Mat<S> dv = dz * T(param::p2).transpose();
    const Mat<S> dgu = layer_norm_backward(dv, T(param::pln_g), t.pln, gT(param::pln_g), gT(param::pln_b));
    const Mat<S> du = (dgu.array() * t.u.unaryExpr([](S v) { return detail::gelu_grad(v); }).array()).matrix();
    linear_backward(t.e, du, gT(param::p1), gT(param::pb1));
    const Mat<S> de = du * T(param::p1).transpose();

    Mat<S> dxf(n, d);
    if (cfg_.pooling == Pooling::mean) {
      dxf.rowwise() = de.row(0) / static_cast<S>(n);
    } else {
      dxf.setZero();
      dxf.row(0) = de.row(0);
    }
    Mat<S> dx = layer_norm_backward(dxf, T(param::lnf_g), t.lnf, gT(param::lnf_g), gT(param::lnf_b));

    for (int l = cfg_.layers - 1; l >= 0; --l) {
      const auto& L = t.layers[static_cast<std::size_t>(l)];
      auto W = [&](int off) -> const Mat<S>& { return P(param::layer(l, off)); };
      auto gW = [&](int off) -> Mat<S>& { return G[static_cast<std::size_t>(param::layer(l, off))]; };

      // feed-forward branch
      linear_backward(L.g, dx, gW(param::w2), gW(param::b2));
      const Mat<S> dg = dx * W(param::w2).transpose();
      const Mat<S> dh1 = (dg.array() * L.h1.unaryExpr([](S v) { return detail::gelu_grad(v); }).array()).matrix();
      linear_backward(L.b, dh1, gW(param::w1), gW(param::b1));
      const Mat<S> db = dh1 * W(param::w1).transpose();
      dx += layer_norm_backward(db, W(param::ln2_g), L.ln2, gW(param::ln2_g), gW(param::ln2_b));

      // attention branch
      linear_backward(L.o, dx, gW(param::wo), gW(param::bo));
      const Mat<S> dho = dx * W(param::wo).transpose();
      Mat<S> dq(n, d), dk(n, d), dv_(n, d);
      for (int h = 0; h < cfg_.heads; ++h) {
        const Mat<S>& p = L.probs[static_cast<std::size_t>(h)];
        const auto dOh = dho.middleCols(h * dh, dh);
        dv_.middleCols(h * dh, dh).noalias() = p.transpose() * dOh;
        Mat<S> dp = dOh * L.v.middleCols(h * dh, dh).transpose();
        const ColVec<S> rowdot = (dp.array() * p.array()).rowwise().sum();
        Mat<S> ds = (p.array() * (dp.colwise() - rowdot).array()).matrix() * scale;
        dq.middleCols(h * dh, dh).noalias() = ds * L.k.middleCols(h * dh, dh);
        dk.middleCols(h * dh, dh).noalias() = ds.transpose() * L.q.middleCols(h * dh, dh);
      }
      linear_backward(L.a, dq, gW(param::wq), gW(param::bq));
      linear_backward(L.a, dk, gW(param::wk), gW(param::bk));
      linear_backward(L.a, dv_, gW(param::wv), gW(param::bv));
      Mat<S> da = dq * W(param::wq).transpose();
      da.noalias() += dk * W(param::wk).transpose();
      da.noalias() += dv_ * W(param::wv).transpose();
      dx += layer_norm_backward(da, W(param::ln1_g), L.ln1, gW(param::ln1_g), gW(param::ln1_b));
    }

    for (Eigen::Index i = 0; i < n; ++i) {
      G[param::tok].row(t.ids[static_cast<std::size_t>(i)]) += dx.row(i);
      G[param::pos].row(i) += dx.row(i);
    }
  }

  EncoderConfig cfg_;
  ParamList<S> params_;
};

// ---- serialization --------------------------------------------------------
// "STLE", u32 version, config block, u32 tensor count, then per tensor
// u64 rows, u64 cols, f32 values row-major.

inline constexpr std::uint32_t kEncoderFileVersion = 1;

inline void write_config(BinaryWriter& w, const EncoderConfig& c) {
  for (int v : {c.vocab, c.d_model, c.layers, c.heads, c.ff_dim, c.max_len, static_cast<int>(c.pooling), c.out_dim}) {
    w.put<std::int32_t>(v);
  }
  w.put<std::uint64_t>(c.seed);
}

inline EncoderConfig read_config(BinaryReader& r) {
  EncoderConfig c;
  c.vocab = r.get<std::int32_t>();
  c.d_model = r.get<std::int32_t>();
  c.layers = r.get<std::int32_t>();
  c.heads = r.get<std::int32_t>();
  c.ff_dim = r.get<std::int32_t>();
  c.max_len = r.get<std::int32_t>();
  const int pooling = r.get<std::int32_t>();
  if (pooling < 0 || pooling > 2) throw Error(ErrorKind::io, "corrupt encoder config block");
  c.pooling = static_cast<Pooling>(pooling);
  c.out_dim = r.get<std::int32_t>();
  c.seed = r.get<std::uint64_t>();
  return c;
}

template <class S>
void save_encoder(const Encoder<S>& enc, const std::string& path) {
  BinaryWriter w(path);
  w.magic("STLE");
  w.put<std::uint32_t>(kEncoderFileVersion);
  write_config(w, enc.config());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(enc.params().size()));
  for (const auto& m : enc.params()) {
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) w.put<float>(static_cast<float>(m(i, j)));
    }
  }
  w.finish();
}

/// Loads an encoder; with `expected`, a differing stored config is an error.
template <class S = float>
Encoder<S> load_encoder(const std::string& path, const EncoderConfig* expected = nullptr) {
  BinaryReader r(path);
  r.expect_magic("STLE");
  const auto version = r.get<std::uint32_t>();
  if (version != kEncoderFileVersion) {
    throw Error(ErrorKind::io, "unsupported encoder file version " + std::to_string(version) + ": " + path);
  }
  const EncoderConfig cfg = read_config(r);
  try {
    cfg.validate();
  } catch (const Error&) {
    throw Error(ErrorKind::io, "corrupt encoder config block: " + path);
  }
  if (expected && !(*expected == cfg)) {
    throw Error(ErrorKind::config, "encoder file config does not match the requested config: " + path);
  }
  const auto shapes = parameter_shapes(cfg);
  if (r.get<std::uint32_t>() != shapes.size()) throw Error(ErrorKind::io, "tensor count mismatch: " + path);
  ParamList<S> params;
  for (const auto& [rows, cols] : shapes) {
    const auto fr = r.get<std::uint64_t>();
    const auto fc = r.get<std::uint64_t>();
    if (fr != static_cast<std::uint64_t>(rows) || fc != static_cast<std::uint64_t>(cols)) {
      throw Error(ErrorKind::io, "tensor shape mismatch: " + path);
    }
    Mat<S> m(rows, cols);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<S>(r.get<float>());
    }
    params.push_back(std::move(m));
  }
  if (!r.at_end()) throw Error(ErrorKind::io, "trailing bytes in encoder file: " + path);
  return Encoder<S>(cfg, std::move(params));
}

// Embedding export: "STLV", u64 rows, u64 dim, f32 row-major.
template <class Derived>
void save_embeddings(const Eigen::MatrixBase<Derived>& e, const std::string& path) {
  BinaryWriter w(path);
  w.magic("STLV");
  w.put<std::uint64_t>(static_cast<std::uint64_t>(e.rows()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(e.cols()));
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index j = 0; j < e.cols(); ++j) w.put<float>(static_cast<float>(e(i, j)));
  }
  w.finish();
}

inline Mat<float> load_embeddings(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("STLV");
  const auto rows = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  const auto cols = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  Mat<float> e(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) e(i, j) = r.get<float>();
  }
  if (!r.at_end()) throw Error(ErrorKind::io, "trailing bytes in embedding file: " + path);
  return e;
}

}  // namespace stlenc
