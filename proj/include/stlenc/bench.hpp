#pragma once

// Wall-time and peak-memory measurements of the symbolic kernel against the
// neural encoder over a grid of batch sizes B and signal counts N.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "stlenc/encoder.hpp"
#include "stlenc/kernel.hpp"
#include "stlenc/signals.hpp"

namespace stlenc {

enum class BenchMethod { kernel, encoder_loaded, encoder_full };
enum class BenchPhase { embed, similarity };

inline std::string_view method_name(BenchMethod m) {
  switch (m) {
    case BenchMethod::kernel: return "kernel";
    case BenchMethod::encoder_loaded: return "encoder_loaded";
    case BenchMethod::encoder_full: return "encoder_full";
  }
  return "?";
}

inline std::string_view phase_name(BenchPhase p) { return p == BenchPhase::embed ? "embed" : "similarity"; }

inline BenchPhase parse_phase(std::string_view s) {
  if (s == "embed") return BenchPhase::embed;
  if (s == "similarity") return BenchPhase::similarity;
  throw Error(ErrorKind::config, "unknown bench phase: " + std::string(s));
}

struct BenchRecord {
  BenchMethod method = BenchMethod::kernel;
  std::size_t B = 0;
  std::size_t N = 0;
  std::size_t P = 0;
  BenchPhase phase = BenchPhase::embed;
  double seconds = 0.0;  // median over repetitions
  double peak_mb = 0.0;
  int repetitions = 0;
  std::uint64_t seed = 0;
  bool oom = false;  // estimated footprint exceeded the memory budget; nothing was run
};

struct BenchGrid {
  std::vector<std::size_t> B;
  std::vector<std::size_t> N;
};

/// "B=100,200;N=100,400,1600" (order of the two parts is free).
inline BenchGrid parse_grid(std::string_view text) {
  BenchGrid g;
  std::stringstream parts{std::string(text)};
  std::string part;
  while (std::getline(parts, part, ';')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::config, "bench grid: expected KEY=v1,v2 in '" + part + "'");
    const std::string key = part.substr(0, eq);
    std::vector<std::size_t>* dst = key == "B" ? &g.B : key == "N" ? &g.N : nullptr;
    if (!dst) throw Error(ErrorKind::config, "bench grid: unknown key '" + key + "'");
    const std::string list = part.substr(eq + 1);
    if (list.empty() || list.back() == ',') throw Error(ErrorKind::config, "bench grid: empty value for " + key);
    std::stringstream vals(list);
    std::string v;
    while (std::getline(vals, v, ',')) {
      std::size_t used = 0;
      long x = 0;
      try {
        x = std::stol(v, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != v.size() || x < 1) throw Error(ErrorKind::config, "bench grid: bad value '" + v + "' for " + key);
      dst->push_back(static_cast<std::size_t>(x));
    }
  }
  if (g.B.empty() || g.N.empty()) throw Error(ErrorKind::config, "bench grid needs both B and N values");
  return g;
}

struct BenchConfig {
  std::size_t points = 101;
  std::size_t vars = 3;
  double horizon = 100.0;
  double sigma2 = kDefaultSigma2;
  int repetitions = 3;
  int warmup = 1;  // untimed runs per cell before the timed repetitions
  std::uint64_t seed = 0;
  double memory_budget_mb = 0.0;  // 0: unlimited
  std::string model_path;         // checkpoint loaded by encoder_full

  void validate() const {
    require(points >= 2 && vars >= 1 && horizon > 0.0, ErrorKind::config, "bench: invalid signal grid");
    require(repetitions >= 1, ErrorKind::config, "bench: repetitions must be >= 1");
    require(warmup >= 0, ErrorKind::config, "bench: warmup must be >= 0");
    require(memory_budget_mb >= 0.0, ErrorKind::config, "bench: memory budget must be >= 0");
  }
};

namespace detail {

inline double read_status_kb(const char* key) {
  std::ifstream in("/proc/self/status");
  std::string line;
  const std::string k = key;
  while (std::getline(in, line)) {
    if (line.compare(0, k.size(), k) == 0) return std::stod(line.substr(k.size() + 1));
  }
  return 0.0;
}

/// Resets the peak-RSS counter where the kernel allows it.
inline void reset_peak_rss() {
  std::ofstream out("/proc/self/clear_refs");
  if (out) out << "5";
}

inline double peak_rss_mb() { return read_status_kb("VmHWM:") / 1024.0; }

inline double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace detail

/// Rough footprint of a phase in MB; used only for the simulated OOM path.
inline double estimated_mb(BenchMethod m, BenchPhase phase, std::size_t B, std::size_t N, const BenchConfig& cfg,
                           const EncoderConfig& enc) {
  double bytes = 0.0;
  if (m == BenchMethod::kernel) {
    bytes = static_cast<double>(N * cfg.points * cfg.vars) * 4.0 + static_cast<double>(B * N) * 8.0;
    if (phase == BenchPhase::similarity) bytes += 2.0 * static_cast<double>(B * N) * 8.0 + static_cast<double>(B * B) * 8.0;
  } else {
    bytes = static_cast<double>(B * enc.out_dim) * 4.0;
    if (phase == BenchPhase::similarity) bytes += static_cast<double>(B * B) * 4.0;
  }
  return bytes / (1024.0 * 1024.0);
}

/// Matrices produced by the last timed repetition, for consistency checks.
struct BenchArtifacts {
  Eigen::MatrixXd kernel_features;  // B x N robustness rows (embed) or Gram (similarity)
  Eigen::MatrixXf encoder_output;   // B x D embeddings (embed) or E E^T (similarity)
};

/// Runs every (method, B, N) cell for one phase. Formula selection is the first
/// B entries of `formulae`; signals are drawn fresh from mu0 per repetition with
/// the configured seed, so every repetition does identical work.
inline std::vector<BenchRecord> run_bench(BenchPhase phase, const std::vector<Formula>& formulae, const BenchGrid& grid,
                                          const Encoder<float>& model, const BenchConfig& cfg,
                                          BenchArtifacts* artifacts = nullptr) {
  cfg.validate();
  const std::size_t max_b = *std::max_element(grid.B.begin(), grid.B.end());
  if (formulae.size() < max_b) {
    throw Error(ErrorKind::validation, "bench: dataset has " + std::to_string(formulae.size()) +
                                           " formulae but the grid needs " + std::to_string(max_b));
  }
  std::string model_path = cfg.model_path;
  std::optional<std::filesystem::path> scratch;
  if (model_path.empty()) {
    scratch = std::filesystem::temp_directory_path() /
              ("stlenc_bench_" + std::to_string(::getpid()) + "_" + std::to_string(cfg.seed) + ".stle");
    save_encoder(model, scratch->string());
    model_path = scratch->string();
  }

  auto run_once = [&](BenchMethod m, const std::vector<Formula>& fs, std::size_t N) {
    if (m == BenchMethod::kernel) {
      const TrajectorySet set = sample_mu0(N, cfg.points, cfg.vars, cfg.horizon, cfg.seed);
      if (phase == BenchPhase::embed) {
        Eigen::MatrixXd rho = robustness_matrix(fs, set);
        if (artifacts) artifacts->kernel_features = std::move(rho);
      } else {
        GramMatrix g = gram(fs, set, cfg.sigma2);
        if (artifacts) artifacts->kernel_features = std::move(g.values);
      }
      return;
    }
    std::optional<Encoder<float>> loaded;
    if (m == BenchMethod::encoder_full) loaded.emplace(load_encoder<float>(model_path));
    const Encoder<float>& enc = loaded ? *loaded : model;
    Eigen::MatrixXf E = enc.embed(enc.tokenize(fs));
    if (phase == BenchPhase::similarity) {
      Eigen::MatrixXf S = E * E.transpose();
      if (artifacts) artifacts->encoder_output = std::move(S);
    } else if (artifacts) {
      artifacts->encoder_output = std::move(E);
    }
  };

  // Repetitions are interleaved across the N cells of a (method, B) row so
  // slow stretches of a shared machine hit every cell alike.
  std::vector<BenchRecord> out;
  for (BenchMethod m : {BenchMethod::kernel, BenchMethod::encoder_loaded, BenchMethod::encoder_full}) {
    for (std::size_t B : grid.B) {
      const std::vector<Formula> fs(formulae.begin(), formulae.begin() + static_cast<long>(B));
      const std::size_t first = out.size();
      std::vector<std::size_t> live;
      for (std::size_t N : grid.N) {
        BenchRecord rec{m, B, N, cfg.points, phase, 0.0, 0.0, cfg.repetitions, cfg.seed, false};
        const double need = estimated_mb(m, phase, B, N, cfg, model.config());
        if (cfg.memory_budget_mb > 0.0 && need > cfg.memory_budget_mb) {
          rec.oom = true;
          rec.repetitions = 0;
          rec.peak_mb = need;
        } else {
          live.push_back(out.size());
        }
        out.push_back(rec);
      }
      std::vector<std::vector<double>> times(out.size() - first);
      for (int r = -cfg.warmup; r < cfg.repetitions; ++r) {
        for (std::size_t cell : live) {
          detail::reset_peak_rss();
          const auto t0 = std::chrono::steady_clock::now();
          run_once(m, fs, out[cell].N);
          if (r < 0) continue;
          times[cell - first].push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
          out[cell].peak_mb = std::max(out[cell].peak_mb, detail::peak_rss_mb());
        }
      }
      for (std::size_t cell : live) out[cell].seconds = std::max(detail::median(times[cell - first]), 1e-9);
    }
  }
  if (scratch) std::filesystem::remove(*scratch);
  return out;
}

inline constexpr const char* kBenchHeader = "method,B,N,P,phase,seconds,peak_mb,repetitions,seed,status";

inline std::string format_bench_record(const BenchRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%s,%.9g,%.3f,%d,%llu,%s", std::string(method_name(r.method)).c_str(), r.B,
                r.N, r.P, std::string(phase_name(r.phase)).c_str(), r.seconds, r.peak_mb, r.repetitions,
                static_cast<unsigned long long>(r.seed), r.oom ? "OOM" : "ok");
  return buf;
}

inline void write_bench_csv(const std::vector<BenchRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write bench records: " + path);
  out << kBenchHeader << '\n';
  for (const auto& r : records) out << format_bench_record(r) << '\n';
  if (!out) throw Error(ErrorKind::io, "write failed: " + path);
}

/// Human-readable summary: one row per (B, N), one time column per method.
inline std::string bench_summary(const std::vector<BenchRecord>& records) {
  std::ostringstream os;
  os << "phase       B      N        kernel  encoder_loaded    encoder_full\n";
  for (const auto& r : records) {
    if (r.method != BenchMethod::kernel) continue;
    char head[64];
    std::snprintf(head, sizeof head, "%-10s %5zu %6zu", std::string(phase_name(r.phase)).c_str(), r.B, r.N);
    os << head;
    for (BenchMethod m : {BenchMethod::kernel, BenchMethod::encoder_loaded, BenchMethod::encoder_full}) {
      for (const auto& q : records) {
        if (q.method == m && q.B == r.B && q.N == r.N && q.phase == r.phase) {
          char cell[32];
          if (q.oom) std::snprintf(cell, sizeof cell, "%16s", "OOM");
          else std::snprintf(cell, sizeof cell, "%15.4fs", q.seconds);
          os << cell;
        }
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace stlenc
