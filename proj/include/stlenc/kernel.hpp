#pragma once

// Monte-Carlo STL kernel: robustness features over sampled signals, cosine
// normalization, then an RBF map onto (0, 1].

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <string>
#include <vector>

#include "stlenc/binary_io.hpp"
#include "stlenc/semantics.hpp"

namespace stlenc {

inline constexpr double kDefaultSigma2 = 0.2;

struct GramMatrix {
  Eigen::MatrixXd values;
  double sigma2 = kDefaultSigma2;
  std::size_t signals = 0;
  std::vector<std::int64_t> ids;

  Eigen::Index size() const { return values.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return values(i, j); }
};

/// (1/N) sum_t ri(t) rj(t).
inline double raw_inner(const RobustnessVector& ri, const RobustnessVector& rj) {
  if (ri.size() != rj.size()) {
    throw Error(ErrorKind::validation, "robustness vectors differ in length (" + std::to_string(ri.size()) +
                                           " vs " + std::to_string(rj.size()) + ")");
  }
  if (ri.size() == 0) throw Error(ErrorKind::validation, "empty robustness vector");
  double acc = 0.0;
  for (std::size_t t = 0; t < ri.size(); ++t) acc += ri.values[t] * rj.values[t];
  return acc / static_cast<double>(ri.size());
}

/// k': raw inner product normalized by both L2 norms.
inline double cosine_similarity(const RobustnessVector& ri, const RobustnessVector& rj) {
  const double ij = raw_inner(ri, rj);
  const double ii = raw_inner(ri, ri);
  const double jj = raw_inner(rj, rj);
  if (ii <= 0.0 || jj <= 0.0) {
    const auto id = ii <= 0.0 ? ri.formula_id : rj.formula_id;
    throw Error(ErrorKind::degenerate, "zero-norm robustness vector (formula " + std::to_string(id) + ")");
  }
  return std::clamp(ij / std::sqrt(ii * jj), -1.0, 1.0);
}

/// k = exp(-(2 - 2k') / (2 sigma^2)).
inline double rbf(double kprime, double sigma2) {
  if (!(sigma2 > 0.0)) throw Error(ErrorKind::validation, "sigma2 must be positive");
  return std::exp(-(2.0 - 2.0 * kprime) / (2.0 * sigma2));
}

/// B x N robustness features, one row per formula. Rows are computed in
/// parallel over formulae; errors name the failing formula index.
inline Eigen::MatrixXd robustness_matrix(const std::vector<Formula>& formulae, const TrajectorySet& set) {
  Eigen::MatrixXd rho(static_cast<Eigen::Index>(formulae.size()), static_cast<Eigen::Index>(set.size()));
  parallel_for(formulae.size(), [&](std::size_t i) {
    try {
      EvalPlan plan(formulae[i], set.points, set.horizon, 0);
      Evaluator ev(plan);
      for (std::size_t t = 0; t < set.size(); ++t) {
        const double r = ev.robustness(set[t]);
        if (!std::isfinite(r)) {
          throw Error(ErrorKind::numeric, "non-finite robustness on trajectory " + std::to_string(t));
        }
        rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = r;
      }
    } catch (const Error& e) {
      throw Error(e.kind(), "formula " + std::to_string(i) + ": " + e.what());
    }
  });
  return rho;
}

/// Rows scaled to unit L2 norm; zero rows raise a degenerate-formula error.
inline Eigen::MatrixXd normalized_rows(const Eigen::MatrixXd& rho, const std::vector<std::int64_t>& ids = {}) {
  Eigen::MatrixXd out = rho;
  for (Eigen::Index i = 0; i < rho.rows(); ++i) {
    const double norm = rho.row(i).norm();
    if (!(norm > 0.0)) {
      const auto id = ids.empty() ? static_cast<std::int64_t>(i) : ids[static_cast<std::size_t>(i)];
      throw Error(ErrorKind::degenerate, "zero-norm robustness vector (formula " + std::to_string(id) + ")");
    }
    out.row(i) /= norm;
  }
  return out;
}

/// Gram matrix from already unit-normalized robustness rows.
inline GramMatrix gram_from_features(const Eigen::MatrixXd& unit_rows, double sigma2, std::size_t signals,
                                     std::vector<std::int64_t> ids = {}) {
  if (!(sigma2 > 0.0)) throw Error(ErrorKind::validation, "sigma2 must be positive");
  GramMatrix g;
  g.sigma2 = sigma2;
  g.signals = signals;
  g.ids = std::move(ids);
  const Eigen::Index b = unit_rows.rows();
  Eigen::MatrixXd cos = unit_rows * unit_rows.transpose();
  g.values.resize(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    g.values(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < b; ++j) {
      const double k = rbf(std::clamp(cos(i, j), -1.0, 1.0), sigma2);
      g.values(i, j) = k;
      g.values(j, i) = k;
    }
  }
  return g;
}

/// K_ij = rbf(cos(rho_i, rho_j), sigma2). Robustness vectors are computed once
/// (O(B N P)) and reused for one B x B product (O(B^2 N)).
inline GramMatrix gram(const std::vector<Formula>& formulae, const TrajectorySet& set, double sigma2 = kDefaultSigma2,
                       std::vector<std::int64_t> ids = {}) {
  if (ids.empty()) {
    for (std::size_t i = 0; i < formulae.size(); ++i) ids.push_back(static_cast<std::int64_t>(i));
  }
  const Eigen::MatrixXd rho = robustness_matrix(formulae, set);
  return gram_from_features(normalized_rows(rho, ids), sigma2, set.size(), std::move(ids));
}

// ---- caches ---------------------------------------------------------------
// Gram: "STLK", u32 version, u64 B, f64 sigma2, u64 N, i64 ids[B], f64 K[B][B].

inline constexpr std::uint32_t kGramCacheVersion = 1;

inline void save_gram(const GramMatrix& g, const std::string& path) {
  BinaryWriter w(path);
  w.magic("STLK");
  w.put<std::uint32_t>(kGramCacheVersion);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(g.size()));
  w.put<double>(g.sigma2);
  w.put<std::uint64_t>(g.signals);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    w.put<std::int64_t>(g.ids.empty() ? i : g.ids[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    for (Eigen::Index j = 0; j < g.size(); ++j) w.put<double>(g.values(i, j));
  }
  w.finish();
}

inline GramMatrix load_gram(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("STLK");
  if (r.get<std::uint32_t>() != kGramCacheVersion) throw Error(ErrorKind::io, "unsupported gram cache version");
  GramMatrix g;
  const auto b = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  g.sigma2 = r.get<double>();
  g.signals = r.get<std::uint64_t>();
  g.ids.resize(static_cast<std::size_t>(b));
  for (auto& id : g.ids) id = r.get<std::int64_t>();
  g.values.resize(b, b);
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < b; ++j) g.values(i, j) = r.get<double>();
  }
  return g;
}

/// Plain CSV, one matrix row per line, 17 significant digits.
inline void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open for writing: " + path);
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + path);
}

inline Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      try {
        row.push_back(std::stod(line.substr(pos, comma - pos)));
      } catch (const std::exception&) {
        throw Error(ErrorKind::io, "malformed CSV value in " + path);
      }
      pos = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw Error(ErrorKind::io, "ragged CSV: " + path);
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

// Robustness cache: "STLR", u32 version, u64 rows, u64 N, f32 values[rows][N].
inline void save_robustness(const Eigen::MatrixXd& rho, const std::string& path) {
  BinaryWriter w(path);
  w.magic("STLR");
  w.put<std::uint32_t>(1);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(rho.rows()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(rho.cols()));
  for (Eigen::Index i = 0; i < rho.rows(); ++i) {
    for (Eigen::Index j = 0; j < rho.cols(); ++j) w.put<float>(static_cast<float>(rho(i, j)));
  }
  w.finish();
}

inline Eigen::MatrixXd load_robustness(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("STLR");
  if (r.get<std::uint32_t>() != 1) throw Error(ErrorKind::io, "unsupported robustness cache version");
  const auto rows = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  const auto cols = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  Eigen::MatrixXd rho(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) rho(i, j) = r.get<float>();
  }
  return rho;
}

}  // namespace stlenc
