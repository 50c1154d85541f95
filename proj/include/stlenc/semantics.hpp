#pragma once

// Boolean satisfaction and quantitative robustness of STL formulae over
// sampled trajectories.
//
// A formula is compiled once into an evaluation plan: a post-order node list
// where each node knows the inclusive range of grid indices its parent needs.
// Evaluation fills one buffer per node over exactly that range, so every
// trajectory costs O(size * P) for F/G (monotonic-queue windows) and
// O(P * W) for until.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "stlenc/formula.hpp"
#include "stlenc/parallel.hpp"
#include "stlenc/signals.hpp"

namespace stlenc {

/// Robustness of `true`; large and finite so min/max and the kernel stay finite.
inline constexpr double kTrueRobustness = 10.0;

struct RobustnessVector {
  std::vector<double> values;
  std::int64_t formula_id = -1;

  std::size_t size() const { return values.size(); }
};

namespace detail {

struct PlanNode {
  NodeKind kind = NodeKind::truth;
  int var = 0;
  Comparison cmp = Comparison::ge;
  double threshold = 0.0;
  std::size_t lo = 0;  // interval offsets in grid steps
  std::size_t hi = 0;
  int lhs = -1;  // plan indices of children
  int rhs = -1;
  std::size_t begin = 0;  // needed index range [begin, end]
  std::size_t end = 0;
};

}  // namespace detail

/// Compiled evaluation schedule of one formula on a fixed grid.
class EvalPlan {
 public:
  EvalPlan(const Formula& f, std::size_t points, double horizon, std::size_t t_index = 0)
      : points_(points) {
    if (t_index >= points) throw Error(ErrorKind::horizon, "evaluation time index outside trajectory");
    root_ = flatten(f, points, horizon);
    nodes_[root_].begin = t_index;
    nodes_[root_].end = t_index;
    // parents precede children in reverse post-order
    for (int i = root_; i >= 0; --i) {
      const auto& n = nodes_[i];
      switch (n.kind) {
        case NodeKind::negation:
        case NodeKind::conjunction:
        case NodeKind::disjunction:
          set_range(n.lhs, n.begin, n.end);
          if (n.rhs >= 0) set_range(n.rhs, n.begin, n.end);
          break;
        case NodeKind::eventually:
        case NodeKind::always: set_range(n.lhs, n.begin + n.lo, n.end + n.hi); break;
        case NodeKind::until:
          set_range(n.lhs, n.begin, n.end + n.hi);
          set_range(n.rhs, n.begin + n.lo, n.end + n.hi);
          break;
        default: break;
      }
    }
    for (const auto& n : nodes_) {
      if (n.end >= points) {
        throw Error(ErrorKind::horizon, "formula incompatible with horizon: needs grid index " +
                                            std::to_string(n.end) + " but trajectory has " +
                                            std::to_string(points) + " points");
      }
    }
  }

  std::size_t points() const { return points_; }
  const std::vector<detail::PlanNode>& nodes() const { return nodes_; }
  int root() const { return root_; }

 private:
  int flatten(const Formula& f, std::size_t points, double horizon) {
    detail::PlanNode n;
    n.kind = f->kind;
    n.var = f->var;
    n.cmp = f->cmp;
    n.threshold = f->threshold;
    if (is_temporal(f->kind)) {
      n.lo = time_to_index(f->interval.lo, points, horizon);
      n.hi = time_to_index(f->interval.hi, points, horizon);
    }
    if (f->lhs) n.lhs = flatten(f->lhs, points, horizon);
    if (f->rhs) n.rhs = flatten(f->rhs, points, horizon);
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  void set_range(int child, std::size_t begin, std::size_t end) {
    nodes_[child].begin = begin;
    nodes_[child].end = end;
  }

  std::size_t points_;
  int root_ = -1;
  std::vector<detail::PlanNode> nodes_;
};

namespace detail {

// out[j] = extreme of in[j .. j + width - 1] for j in [0, count)
template <bool kMax, class T>
void sliding_extreme(const std::vector<T>& in, std::size_t width, std::size_t count, std::vector<T>& out,
                     std::deque<std::size_t>& q) {
  out.resize(count);
  q.clear();
  auto better = [](T a, T b) { return kMax ? a >= b : a <= b; };
  std::size_t next = 0;
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t last = j + width - 1;
    for (; next <= last; ++next) {
      while (!q.empty() && better(in[next], in[q.back()])) q.pop_back();
      q.push_back(next);
    }
    while (q.front() < j) q.pop_front();
    out[j] = in[q.front()];
  }
}

}  // namespace detail

/// Reusable buffers for evaluating one plan over many trajectories.
class Evaluator {
 public:
  explicit Evaluator(const EvalPlan& plan) : plan_(plan), buffers_(plan.nodes().size()) {}

  double robustness(const TrajectoryView& xi) {
    if (xi.points != plan_.points()) throw Error(ErrorKind::validation, "trajectory/plan grid mismatch");
    const auto& nodes = plan_.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      auto& out = buffers_[i];
      const std::size_t count = n.end - n.begin + 1;
      switch (n.kind) {
        case NodeKind::truth: out.assign(count, kTrueRobustness); break;
        case NodeKind::predicate: {
          out.resize(count);
          const bool upper = n.cmp == Comparison::le || n.cmp == Comparison::lt;
          for (std::size_t j = 0; j < count; ++j) {
            const double x = xi.at(n.begin + j, static_cast<std::size_t>(n.var));
            out[j] = upper ? n.threshold - x : x - n.threshold;
          }
          break;
        }
        case NodeKind::negation: {
          const auto& in = buffers_[n.lhs];
          out.resize(count);
          for (std::size_t j = 0; j < count; ++j) out[j] = -in[j];
          break;
        }
        case NodeKind::conjunction:
        case NodeKind::disjunction: {
          const auto& a = buffers_[n.lhs];
          const auto& b = buffers_[n.rhs];
          out.resize(count);
          if (n.kind == NodeKind::conjunction) {
            for (std::size_t j = 0; j < count; ++j) out[j] = std::min(a[j], b[j]);
          } else {
            for (std::size_t j = 0; j < count; ++j) out[j] = std::max(a[j], b[j]);
          }
          break;
        }
        case NodeKind::eventually:
          detail::sliding_extreme<true>(buffers_[n.lhs], n.hi - n.lo + 1, count, out, queue_);
          break;
        case NodeKind::always:
          detail::sliding_extreme<false>(buffers_[n.lhs], n.hi - n.lo + 1, count, out, queue_);
          break;
        case NodeKind::until: {
          // lhs buffer starts at n.begin, rhs buffer at n.begin + n.lo
          const auto& a = buffers_[n.lhs];
          const auto& b = buffers_[n.rhs];
          out.resize(count);
          for (std::size_t j = 0; j < count; ++j) {
            double running = std::numeric_limits<double>::infinity();
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s <= n.hi; ++s) {
              running = std::min(running, a[j + s]);
              if (s >= n.lo) best = std::max(best, std::min(b[j + s - n.lo], running));
            }
            out[j] = best;
          }
          break;
        }
      }
    }
    return buffers_[plan_.root()][0];
  }

  bool satisfies(const TrajectoryView& xi) {
    if (xi.points != plan_.points()) throw Error(ErrorKind::validation, "trajectory/plan grid mismatch");
    const auto& nodes = plan_.nodes();
    bools_.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const auto& n = nodes[i];
      auto& out = bools_[i];
      const std::size_t count = n.end - n.begin + 1;
      out.assign(count, 0);
      switch (n.kind) {
        case NodeKind::truth: std::fill(out.begin(), out.end(), 1); break;
        case NodeKind::predicate:
          for (std::size_t j = 0; j < count; ++j) {
            const double x = xi.at(n.begin + j, static_cast<std::size_t>(n.var));
            switch (n.cmp) {
              case Comparison::ge: out[j] = x >= n.threshold; break;
              case Comparison::gt: out[j] = x > n.threshold; break;
              case Comparison::le: out[j] = x <= n.threshold; break;
              case Comparison::lt: out[j] = x < n.threshold; break;
            }
          }
          break;
        case NodeKind::negation:
          for (std::size_t j = 0; j < count; ++j) out[j] = !bools_[n.lhs][j];
          break;
        case NodeKind::conjunction:
          for (std::size_t j = 0; j < count; ++j) out[j] = bools_[n.lhs][j] && bools_[n.rhs][j];
          break;
        case NodeKind::disjunction:
          for (std::size_t j = 0; j < count; ++j) out[j] = bools_[n.lhs][j] || bools_[n.rhs][j];
          break;
        case NodeKind::eventually:
        case NodeKind::always: {
          // count of true values in the current window
          const auto& in = bools_[n.lhs];
          const std::size_t width = n.hi - n.lo + 1;
          std::size_t hits = 0;
          for (std::size_t s = 0; s < width; ++s) hits += in[s];
          for (std::size_t j = 0; j < count; ++j) {
            if (j > 0) {
              hits += in[j + width - 1];
              hits -= in[j - 1];
            }
            out[j] = n.kind == NodeKind::eventually ? hits > 0 : hits == width;
          }
          break;
        }
        case NodeKind::until: {
          const auto& a = bools_[n.lhs];
          const auto& b = bools_[n.rhs];
          for (std::size_t j = 0; j < count; ++j) {
            for (std::size_t s = 0; s <= n.hi; ++s) {
              if (!a[j + s]) break;
              if (s >= n.lo && b[j + s - n.lo]) {
                out[j] = 1;
                break;
              }
            }
          }
          break;
        }
      }
    }
    return bools_[plan_.root()][0] != 0;
  }

 private:
  const EvalPlan& plan_;
  std::vector<std::vector<double>> buffers_;
  std::vector<std::vector<std::uint8_t>> bools_;
  std::deque<std::size_t> queue_;
};

/// rho(f, xi, t_index).
inline double robustness(const Formula& f, const TrajectoryView& xi, std::size_t t_index = 0) {
  EvalPlan plan(f, xi.points, xi.horizon, t_index);
  return Evaluator(plan).robustness(xi);
}

/// Boolean satisfaction at t_index. Agrees in sign with robustness; at
/// rho == 0 the comparison strictness decides.
inline bool satisfies(const Formula& f, const TrajectoryView& xi, std::size_t t_index = 0) {
  EvalPlan plan(f, xi.points, xi.horizon, t_index);
  return Evaluator(plan).satisfies(xi);
}

/// Throws a horizon error if `f` cannot be evaluated at t = 0 on this grid.
inline void check_horizon(const Formula& f, std::size_t points, double horizon) {
  EvalPlan plan(f, points, horizon, 0);
}

/// rho(f, xi_i, 0) for every trajectory in the set.
inline RobustnessVector robustness_vector(const Formula& f, const TrajectorySet& set, std::int64_t formula_id = -1) {
  EvalPlan plan(f, set.points, set.horizon, 0);
  RobustnessVector rv;
  rv.formula_id = formula_id;
  rv.values.resize(set.size());
  const std::size_t chunks = std::min<std::size_t>(num_threads(), set.size());
  const std::size_t per = (set.size() + chunks - 1) / chunks;
  parallel_for(chunks, [&](std::size_t c) {
    Evaluator ev(plan);
    const std::size_t end = std::min(set.size(), (c + 1) * per);
    for (std::size_t i = c * per; i < end; ++i) {
      const double r = ev.robustness(set[i]);
      if (!std::isfinite(r)) {
        throw Error(ErrorKind::numeric, "non-finite robustness on trajectory " + std::to_string(i));
      }
      rv.values[i] = r;
    }
  });
  return rv;
}

}  // namespace stlenc
