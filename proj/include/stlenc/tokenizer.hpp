#pragma once

// Token encoding consumed by the encoder.
//
// A sequence is [AGG] + the canonical print's tokens + [EOS], right-padded
// with [PAD]. Numerals are spelled one character per token (digits, '.',
// '-') in their shortest fixed-point form, so `2.0` becomes `2 . 0`.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "stlenc/parser.hpp"

namespace stlenc {

enum class AggToken { cls, bos };

namespace tok {
inline constexpr int pad = 0;
inline constexpr int cls = 1;
inline constexpr int bos = 2;
inline constexpr int eos = 3;
inline constexpr int truth = 4;
inline constexpr int negation = 5;
inline constexpr int conjunction = 6;
inline constexpr int disjunction = 7;
inline constexpr int until = 8;
inline constexpr int eventually = 9;
inline constexpr int always = 10;
inline constexpr int lparen = 11;
inline constexpr int rparen = 12;
inline constexpr int lbracket = 13;
inline constexpr int comma = 14;
inline constexpr int rbracket = 15;
inline constexpr int le = 16;
inline constexpr int ge = 17;
inline constexpr int lt = 18;
inline constexpr int gt = 19;
inline constexpr int digit0 = 20;  // digits occupy 20..29
inline constexpr int point = 30;
inline constexpr int minus = 31;
inline constexpr int var0 = 32;  // x_0 .. x_{kMaxVars-1}
}  // namespace tok

inline constexpr int kVocabSize = tok::var0 + kMaxVars;

struct TokenSequence {
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;

  std::size_t length() const { return ids.size(); }
  std::size_t valid_length() const {
    std::size_t n = 0;
    while (n < mask.size() && mask[n]) ++n;
    return n;
  }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Shortest fixed-point spelling of the canonical (6 significant digit) value.
inline std::string compact_numeral(double v) {
  v = canonical_value(v);
  if (v == 0.0) return "0.0";
  const int magnitude = static_cast<int>(std::floor(std::log10(std::fabs(v))));
  int decimals = 5 - magnitude;
  if (decimals < 1) decimals = 1;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  while (s.size() > 2 && s.back() == '0' && s[s.size() - 2] != '.') s.pop_back();
  return s;
}

namespace detail {

inline void push_numeral(double v, std::vector<int>& out) {
  for (char c : compact_numeral(v)) {
    if (c == '.') out.push_back(tok::point);
    else if (c == '-') out.push_back(tok::minus);
    else out.push_back(tok::digit0 + (c - '0'));
  }
}

inline void push_interval(const Interval& iv, std::vector<int>& out) {
  out.push_back(tok::lbracket);
  push_numeral(iv.lo, out);
  out.push_back(tok::comma);
  push_numeral(iv.hi, out);
  out.push_back(tok::rbracket);
}

inline void emit_tokens(const Formula& f, std::vector<int>& out) {
  switch (f->kind) {
    case NodeKind::truth: out.push_back(tok::truth); break;
    case NodeKind::predicate: {
      if (f->var >= kMaxVars) throw Error(ErrorKind::validation, "variable index outside vocabulary");
      out.push_back(tok::var0 + f->var);
      static constexpr std::array<int, 4> cmp_tokens{tok::le, tok::ge, tok::lt, tok::gt};
      out.push_back(cmp_tokens[static_cast<int>(f->cmp)]);
      push_numeral(f->threshold, out);
      break;
    }
    case NodeKind::negation:
      out.push_back(tok::negation);
      emit_tokens(f->lhs, out);
      break;
    case NodeKind::eventually:
    case NodeKind::always:
      out.push_back(f->kind == NodeKind::always ? tok::always : tok::eventually);
      push_interval(f->interval, out);
      emit_tokens(f->lhs, out);
      break;
    case NodeKind::conjunction:
    case NodeKind::disjunction:
    case NodeKind::until:
      out.push_back(tok::lparen);
      emit_tokens(f->lhs, out);
      if (f->kind == NodeKind::until) {
        out.push_back(tok::until);
        push_interval(f->interval, out);
      } else {
        out.push_back(f->kind == NodeKind::conjunction ? tok::conjunction : tok::disjunction);
      }
      emit_tokens(f->rhs, out);
      out.push_back(tok::rparen);
      break;
  }
}

}  // namespace detail

/// Body tokens only (no aggregation/EOS/padding).
inline std::vector<int> formula_tokens(const Formula& f) {
  std::vector<int> out;
  detail::emit_tokens(f, out);
  return out;
}

inline TokenSequence tokenize(const Formula& f, std::size_t max_len, AggToken agg) {
  std::vector<int> body = formula_tokens(f);
  if (body.size() + 2 > max_len) {
    throw Error(ErrorKind::validation, "token overflow: formula needs " + std::to_string(body.size() + 2) +
                                           " tokens, max_len is " + std::to_string(max_len));
  }
  TokenSequence seq;
  seq.ids.assign(max_len, tok::pad);
  seq.mask.assign(max_len, 0);
  seq.ids[0] = agg == AggToken::cls ? tok::cls : tok::bos;
  std::copy(body.begin(), body.end(), seq.ids.begin() + 1);
  seq.ids[body.size() + 1] = tok::eos;
  std::fill(seq.mask.begin(), seq.mask.begin() + static_cast<long>(body.size() + 2), 1);
  return seq;
}

/// Drops the padded tail; the encoder treats both forms identically.
inline TokenSequence trim_padding(const TokenSequence& seq) {
  const std::size_t n = seq.valid_length();
  return {std::vector<int>(seq.ids.begin(), seq.ids.begin() + static_cast<long>(n)),
          std::vector<std::uint8_t>(n, 1)};
}

}  // namespace stlenc
