#pragma once

// Sampled trajectories and the base measure mu0 used for Monte-Carlo
// estimation of the kernel.
//
// Values are stored as f32 so the on-disk cache round-trips bit-exactly;
// all downstream arithmetic is f64.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stlenc/binary_io.hpp"
#include "stlenc/error.hpp"
#include "stlenc/rng.hpp"

namespace stlenc {

inline constexpr double kSignalClip = 20.0;

/// Read-only view of one trajectory: `points` samples on the uniform grid
/// t_p = p * horizon / (points - 1), `vars` variables per sample.
struct TrajectoryView {
  const float* data = nullptr;
  std::size_t points = 0;
  std::size_t vars = 0;
  double horizon = 0.0;

  double at(std::size_t p, std::size_t var) const { return data[p * vars + var]; }
  double time_step() const { return horizon / static_cast<double>(points - 1); }
};

/// Owning single trajectory (points x vars, row-major).
struct Trajectory {
  std::size_t points = 0;
  std::size_t vars = 0;
  double horizon = 1.0;
  std::vector<float> values;

  Trajectory() = default;
  Trajectory(std::size_t p, std::size_t k, double t) : points(p), vars(k), horizon(t), values(p * k, 0.0f) {
    if (p < 2) throw Error(ErrorKind::validation, "trajectory needs at least 2 points");
    if (!(t > 0.0)) throw Error(ErrorKind::validation, "trajectory horizon must be positive");
  }

  float& at(std::size_t p, std::size_t var) { return values[p * vars + var]; }
  TrajectoryView view() const { return {values.data(), points, vars, horizon}; }
};

/// N trajectories sharing shape, stored contiguously as [n][points][vars].
struct TrajectorySet {
  std::size_t count = 0;
  std::size_t points = 0;
  std::size_t vars = 0;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  std::vector<float> values;

  std::size_t size() const { return count; }
  TrajectoryView operator[](std::size_t i) const {
    return {values.data() + i * points * vars, points, vars, horizon};
  }
};

/// Nearest grid index for time t (round half up).
inline std::size_t time_to_index(double t, std::size_t points, double horizon) {
  if (!(t >= 0.0) || t > horizon * (1.0 + 1e-12)) {
    throw Error(ErrorKind::horizon, "time " + std::to_string(t) + " outside horizon [0, " +
                                        std::to_string(horizon) + "]");
  }
  const double scaled = t * static_cast<double>(points - 1) / horizon;
  auto idx = static_cast<std::size_t>(std::floor(scaled + 0.5));
  return std::min(idx, points - 1);
}

inline std::size_t time_to_index(double t, const TrajectoryView& xi) {
  return time_to_index(t, xi.points, xi.horizon);
}

/// Draws n trajectories from mu0: per variable an independent Gaussian random
/// walk, x(t_0) ~ N(0, 1), increments N(0, s^2) with s = 4 / sqrt(P), clipped
/// to [-20, 20].
inline TrajectorySet sample_mu0(std::size_t n, std::size_t points, std::size_t vars, double horizon,
                                std::uint64_t seed) {
  if (n < 1 || points < 2 || vars < 1) {
    throw Error(ErrorKind::validation, "sample_mu0 needs n >= 1, points >= 2, vars >= 1");
  }
  if (!(horizon > 0.0)) throw Error(ErrorKind::validation, "sample_mu0 needs horizon > 0");
  TrajectorySet set;
  set.count = n;
  set.points = points;
  set.vars = vars;
  set.horizon = horizon;
  set.seed = seed;
  set.values.resize(n * points * vars);
  const double step = 4.0 / std::sqrt(static_cast<double>(points));
  Rng rng(mix_seed(seed));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    float* traj = set.values.data() + i * points * vars;
    for (std::size_t v = 0; v < vars; ++v) {
      double x = gauss(rng);
      for (std::size_t p = 0; p < points; ++p) {
        if (p > 0) x += step * gauss(rng);
        traj[p * vars + v] = static_cast<float>(std::clamp(x, -kSignalClip, kSignalClip));
      }
    }
  }
  return set;
}

// ---- binary cache ---------------------------------------------------------
// header: "STLT", u32 version, u64 N, u64 P, u64 k, f64 T; then f32 values
// row-major [N][P][k], little-endian.

inline constexpr std::uint32_t kTrajectoryCacheVersion = 1;

inline void save_trajectories(const TrajectorySet& set, const std::string& path) {
  BinaryWriter w(path);
  w.magic("STLT");
  w.put<std::uint32_t>(kTrajectoryCacheVersion);
  w.put<std::uint64_t>(set.count);
  w.put<std::uint64_t>(set.points);
  w.put<std::uint64_t>(set.vars);
  w.put<double>(set.horizon);
  for (float v : set.values) w.put<float>(v);
  w.finish();
}

inline TrajectorySet load_trajectories(const std::string& path) {
  BinaryReader r(path);
  r.expect_magic("STLT");
  const auto version = r.get<std::uint32_t>();
  if (version != kTrajectoryCacheVersion) {
    throw Error(ErrorKind::io, "unsupported trajectory cache version " + std::to_string(version));
  }
  TrajectorySet set;
  set.count = r.get<std::uint64_t>();
  set.points = r.get<std::uint64_t>();
  set.vars = r.get<std::uint64_t>();
  set.horizon = r.get<double>();
  if (set.count < 1 || set.points < 2 || set.vars < 1 || !(set.horizon > 0.0)) {
    throw Error(ErrorKind::io, "corrupt trajectory cache header: " + path);
  }
  set.values.resize(set.count * set.points * set.vars);
  for (float& v : set.values) {
    v = r.get<float>();
    if (!std::isfinite(v)) throw Error(ErrorKind::io, "non-finite value in trajectory cache: " + path);
  }
  return set;
}

}  // namespace stlenc
