#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stlenc {

enum class ErrorKind {
  io,          // missing/corrupt files
  config,      // bad keys, bad values, bad CLI usage
  syntax,      // formula text does not parse
  validation,  // well-formed input that violates a contract
  horizon,     // formula window leaves the trajectory
  degenerate,  // zero-norm robustness vector
  numeric,     // non-finite values
};

inline std::string_view error_prefix(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return "E_IO";
    case ErrorKind::config: return "E_CONFIG";
    case ErrorKind::syntax: return "E_SYNTAX";
    case ErrorKind::validation: return "E_VALIDATION";
    case ErrorKind::horizon: return "E_HORIZON";
    case ErrorKind::degenerate: return "E_DEGENERATE";
    case ErrorKind::numeric: return "E_NUMERIC";
  }
  return "E_UNKNOWN";
}

/// Process exit status for the CLI: 2 I/O, 3 config, 4 numeric/validation.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::io: return 2;
    case ErrorKind::config: return 3;
    default: return 4;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure; `offset()` is the byte offset into the input text.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : Error(ErrorKind::syntax, what + " at byte " + std::to_string(offset)),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace stlenc
