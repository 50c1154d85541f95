#pragma once

// Concrete text syntax for STL formulae.
//
//   formula  := or
//   or       := and ( "or" and )*
//   and      := until ( "and" until )*
//   until    := unary ( "until" interval unary )*
//   unary    := "not" unary | ("eventually" | "always") interval unary | primary
//   primary  := "true" | "x_" INT cmp NUMBER | "(" formula ")"
//   interval := "[" NUMBER "," NUMBER "]"
//   cmp      := "<=" | ">=" | "<" | ">"
//
// Binary chains associate to the left. The printer always parenthesizes
// binary nodes, so print() output parses back to the same tree.

#include <cctype>
#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>

#include "stlenc/formula.hpp"

namespace stlenc {

/// Upper bound on variable indices representable in the token vocabulary.
inline constexpr int kMaxVars = 8;

namespace detail {

class Parser {
 public:
  Parser(std::string_view text, int num_vars) : text_(text), num_vars_(num_vars) {}

  Formula parse_all() {
    Formula f = parse_or();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw SyntaxError(what, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

  // Consumes `kw` when it appears as a whole word.
  bool accept_word(std::string_view kw) {
    skip_ws();
    if (text_.substr(pos_, kw.size()) != kw) return false;
    const std::size_t end = pos_ + kw.size();
    if (end < text_.size() && ident_char(text_[end])) return false;
    pos_ = end;
    return true;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  double parse_number() {
    skip_ws();
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    if (begin != end && *begin == '+') fail("unexpected '+'");
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr == begin) fail("expected number");
    pos_ += static_cast<std::size_t>(ptr - begin);
    return value;
  }

  Interval parse_interval() {
    const std::size_t start = pos_;
    expect('[');
    Interval iv;
    iv.lo = parse_number();
    expect(',');
    iv.hi = parse_number();
    expect(']');
    if (!iv.valid()) {
      throw Error(ErrorKind::validation, "interval error at byte " + std::to_string(start) +
                                             ": need 0 <= a < b or a = b = 0");
    }
    return iv;
  }

  Formula parse_or() {
    Formula f = parse_and();
    while (accept_word("or")) f = make_or(f, parse_and());
    return f;
  }

  Formula parse_and() {
    Formula f = parse_until();
    while (accept_word("and")) f = make_and(f, parse_until());
    return f;
  }

  Formula parse_until() {
    Formula f = parse_unary();
    while (accept_word("until")) {
      Interval iv = parse_interval();
      f = make_until(iv, f, parse_unary());
    }
    return f;
  }

  Formula parse_unary() {
    if (accept_word("not")) return make_not(parse_unary());
    if (accept_word("eventually")) {
      Interval iv = parse_interval();
      return make_eventually(iv, parse_unary());
    }
    if (accept_word("always")) {
      Interval iv = parse_interval();
      return make_always(iv, parse_unary());
    }
    return parse_primary();
  }

  Formula parse_primary() {
    skip_ws();
    if (accept('(')) {
      Formula f = parse_or();
      expect(')');
      return f;
    }
    if (accept_word("true")) return make_true();
    if (text_.substr(pos_, 2) == "x_") {
      const std::size_t var_pos = pos_;
      pos_ += 2;
      int var = 0;
      const char* begin = text_.data() + pos_;
      auto [ptr, ec] = std::from_chars(begin, text_.data() + text_.size(), var);
      if (ec != std::errc() || ptr == begin) fail("expected variable index");
      pos_ += static_cast<std::size_t>(ptr - begin);
      if (var >= num_vars_) {
        throw Error(ErrorKind::validation, "unknown variable x_" + std::to_string(var) + " at byte " +
                                               std::to_string(var_pos) + " (signal dimension " +
                                               std::to_string(num_vars_) + ")");
      }
      skip_ws();
      Comparison cmp;
      if (accept('<')) {
        cmp = accept('=') ? Comparison::le : Comparison::lt;
      } else if (accept('>')) {
        cmp = accept('=') ? Comparison::ge : Comparison::gt;
      } else {
        fail("expected comparison operator");
      }
      const double threshold = parse_number();
      return make_predicate(var, cmp, threshold);
    }
    fail("expected formula");
  }

  std::string_view text_;
  int num_vars_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses formula text. Variables must satisfy index < num_vars.
inline Formula parse(std::string_view text, int num_vars = kMaxVars) {
  return detail::Parser(text, num_vars).parse_all();
}

/// Canonical numeral: six significant digits, trailing zeros kept.
inline std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  std::snprintf(buf, sizeof buf, "%#.6g", v);
  return buf;
}

/// Value after a print/parse round trip.
inline double canonical_value(double v) {
  const std::string s = format_number(v);
  double out = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), out);
  return out;
}

inline std::string_view comparison_text(Comparison c) {
  switch (c) {
    case Comparison::le: return "<=";
    case Comparison::ge: return ">=";
    case Comparison::lt: return "<";
    case Comparison::gt: return ">";
  }
  return "?";
}

namespace detail {
inline void print_into(const Formula& f, std::string& out) {
  auto interval = [&](const Interval& iv) {
    out += '[';
    out += format_number(iv.lo);
    out += ',';
    out += format_number(iv.hi);
    out += ']';
  };
  switch (f->kind) {
    case NodeKind::truth: out += "true"; break;
    case NodeKind::predicate:
      out += "x_" + std::to_string(f->var) + " ";
      out += comparison_text(f->cmp);
      out += " " + format_number(f->threshold);
      break;
    case NodeKind::negation:
      out += "not ";
      print_into(f->lhs, out);
      break;
    case NodeKind::eventually:
    case NodeKind::always:
      out += f->kind == NodeKind::always ? "always" : "eventually";
      interval(f->interval);
      out += ' ';
      print_into(f->lhs, out);
      break;
    case NodeKind::conjunction:
    case NodeKind::disjunction:
    case NodeKind::until:
      out += "( ";
      print_into(f->lhs, out);
      if (f->kind == NodeKind::until) {
        out += " until";
        interval(f->interval);
        out += ' ';
      } else {
        out += f->kind == NodeKind::conjunction ? " and " : " or ";
      }
      print_into(f->rhs, out);
      out += " )";
      break;
  }
}
}  // namespace detail

inline std::string print(const Formula& f) {
  std::string out;
  detail::print_into(f, out);
  return out;
}

}  // namespace stlenc
