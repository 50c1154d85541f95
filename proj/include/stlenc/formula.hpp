#pragma once

// Immutable STL abstract syntax tree.
//
// Nodes are shared and never mutated after construction; rewrites build new
// spines and reuse untouched subtrees.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stlenc/error.hpp"

namespace stlenc {

enum class NodeKind { truth, predicate, negation, conjunction, disjunction, until, eventually, always };

enum class Comparison { le, ge, lt, gt };

/// Closed time interval [lo, hi] in time units. Valid when lo >= 0 and
/// hi > lo, or the identity interval [0, 0].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool is_identity() const { return lo == 0.0 && hi == 0.0; }
  bool valid() const {
    return std::isfinite(lo) && std::isfinite(hi) && lo >= 0.0 && (hi > lo || is_identity());
  }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct Node;
using Formula = std::shared_ptr<const Node>;

struct Node {
  NodeKind kind = NodeKind::truth;
  // predicate payload
  int var = 0;
  Comparison cmp = Comparison::ge;
  double threshold = 0.0;
  // temporal payload
  Interval interval;
  // lhs is the only child of unary nodes
  Formula lhs;
  Formula rhs;
};

inline bool is_temporal(NodeKind k) {
  return k == NodeKind::until || k == NodeKind::eventually || k == NodeKind::always;
}
inline bool is_binary(NodeKind k) {
  return k == NodeKind::conjunction || k == NodeKind::disjunction || k == NodeKind::until;
}
inline bool is_unary(NodeKind k) {
  return k == NodeKind::negation || k == NodeKind::eventually || k == NodeKind::always;
}

inline void check_interval(const Interval& iv) {
  if (!iv.valid()) {
    throw Error(ErrorKind::validation, "invalid interval [" + std::to_string(iv.lo) + "," +
                                           std::to_string(iv.hi) + "]: need 0 <= a < b or a = b = 0");
  }
}

// ---- constructors ---------------------------------------------------------

inline Formula make_true() {
  static const Formula t = std::make_shared<const Node>(Node{});
  return t;
}

inline Formula make_predicate(int var, Comparison cmp, double threshold) {
  if (var < 0) throw Error(ErrorKind::validation, "negative variable index");
  if (!std::isfinite(threshold)) throw Error(ErrorKind::validation, "non-finite threshold");
  Node n;
  n.kind = NodeKind::predicate;
  n.var = var;
  n.cmp = cmp;
  n.threshold = threshold;
  return std::make_shared<const Node>(std::move(n));
}

inline Formula make_not(Formula child) {
  Node n;
  n.kind = NodeKind::negation;
  n.lhs = std::move(child);
  return std::make_shared<const Node>(std::move(n));
}

inline Formula make_binary(NodeKind kind, Formula a, Formula b, Interval iv = {}) {
  Node n;
  n.kind = kind;
  n.lhs = std::move(a);
  n.rhs = std::move(b);
  if (kind == NodeKind::until) {
    check_interval(iv);
    n.interval = iv;
  }
  return std::make_shared<const Node>(std::move(n));
}

inline Formula make_and(Formula a, Formula b) { return make_binary(NodeKind::conjunction, std::move(a), std::move(b)); }
inline Formula make_or(Formula a, Formula b) { return make_binary(NodeKind::disjunction, std::move(a), std::move(b)); }
inline Formula make_until(Interval iv, Formula a, Formula b) {
  return make_binary(NodeKind::until, std::move(a), std::move(b), iv);
}

inline Formula make_temporal(NodeKind kind, Interval iv, Formula child) {
  check_interval(iv);
  Node n;
  n.kind = kind;
  n.interval = iv;
  n.lhs = std::move(child);
  return std::make_shared<const Node>(std::move(n));
}

inline Formula make_eventually(Interval iv, Formula child) {
  return make_temporal(NodeKind::eventually, iv, std::move(child));
}
inline Formula make_always(Interval iv, Formula child) {
  return make_temporal(NodeKind::always, iv, std::move(child));
}

/// Copy of `f` with its children replaced (payload kept).
inline Formula with_children(const Formula& f, Formula lhs, Formula rhs = nullptr) {
  Node n = *f;
  n.lhs = std::move(lhs);
  n.rhs = std::move(rhs);
  return std::make_shared<const Node>(std::move(n));
}

// ---- structure ------------------------------------------------------------

inline int depth(const Formula& f) {
  int d = 0;
  if (f->lhs) d = std::max(d, depth(f->lhs));
  if (f->rhs) d = std::max(d, depth(f->rhs));
  return d + 1;
}

inline std::size_t size(const Formula& f) {
  std::size_t n = 1;
  if (f->lhs) n += size(f->lhs);
  if (f->rhs) n += size(f->rhs);
  return n;
}

/// Exact structural equality, including numeric payloads.
inline bool equal(const Formula& a, const Formula& b) {
  if (a == b) return true;
  if (!a || !b || a->kind != b->kind) return false;
  switch (a->kind) {
    case NodeKind::truth: return true;
    case NodeKind::predicate:
      return a->var == b->var && a->cmp == b->cmp && a->threshold == b->threshold;
    case NodeKind::negation: return equal(a->lhs, b->lhs);
    case NodeKind::conjunction:
    case NodeKind::disjunction: return equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
    case NodeKind::until:
      return a->interval == b->interval && equal(a->lhs, b->lhs) && equal(a->rhs, b->rhs);
    case NodeKind::eventually:
    case NodeKind::always: return a->interval == b->interval && equal(a->lhs, b->lhs);
  }
  return false;
}

/// Same node kinds and tree shape, ignoring numeric payloads.
inline bool same_shape(const Formula& a, const Formula& b) {
  if (!a || !b) return !a && !b;
  if (a->kind != b->kind) return false;
  if (a->kind == NodeKind::predicate && (a->var != b->var || a->cmp != b->cmp)) return false;
  return same_shape(a->lhs, b->lhs) && same_shape(a->rhs, b->rhs);
}

/// Largest variable index referenced, or -1.
inline int max_var(const Formula& f) {
  int m = f->kind == NodeKind::predicate ? f->var : -1;
  if (f->lhs) m = std::max(m, max_var(f->lhs));
  if (f->rhs) m = std::max(m, max_var(f->rhs));
  return m;
}

/// Pre-order node list; index 0 is the root.
inline std::vector<Formula> preorder(const Formula& f) {
  std::vector<Formula> out;
  std::function<void(const Formula&)> visit = [&](const Formula& n) {
    out.push_back(n);
    if (n->lhs) visit(n->lhs);
    if (n->rhs) visit(n->rhs);
  };
  visit(f);
  return out;
}

/// Rebuilds `root` with the pre-order node `target` replaced by `replacement`.
inline Formula replace_at(const Formula& root, std::size_t target, const Formula& replacement) {
  std::size_t counter = 0;
  std::function<Formula(const Formula&)> rebuild = [&](const Formula& n) -> Formula {
    if (counter++ == target) {
      counter += size(n) - 1;
      return replacement;
    }
    if (!n->lhs) return n;
    const std::size_t before = counter;
    Formula l = rebuild(n->lhs);
    Formula r = n->rhs ? rebuild(n->rhs) : nullptr;
    if (target < before || target >= counter) return n;
    return with_children(n, std::move(l), std::move(r));
  };
  return rebuild(root);
}

/// Parent of every pre-order node (npos for the root).
inline std::vector<std::size_t> parent_indices(const Formula& f) {
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parents;
  std::function<void(const Formula&, std::size_t)> visit = [&](const Formula& n, std::size_t parent) {
    const std::size_t self = parents.size();
    parents.push_back(parent);
    if (n->lhs) visit(n->lhs, self);
    if (n->rhs) visit(n->rhs, self);
  };
  visit(f, npos);
  return parents;
}

/// Applies `fn` to every node bottom-up, rebuilding the tree from its results.
inline Formula transform(const Formula& f, const std::function<Formula(const Formula&)>& fn) {
  Formula l = f->lhs ? transform(f->lhs, fn) : nullptr;
  Formula r = f->rhs ? transform(f->rhs, fn) : nullptr;
  Formula rebuilt = (l == f->lhs && r == f->rhs) ? f : with_children(f, std::move(l), std::move(r));
  return fn(rebuilt);
}

}  // namespace stlenc
