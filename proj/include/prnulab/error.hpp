#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prnulab {

enum class ErrorKind {
  decode,
  format,
  size,
  shape,
  decomposition,
  empty_accumulator,
  degenerate_input,
  degenerate_surface,
  insufficient_reference,
  no_mismatch_pool,
  lookup,
  config,
  io,
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::decode: return "decode-error";
    case ErrorKind::format: return "format-error";
    case ErrorKind::size: return "size-error";
    case ErrorKind::shape: return "shape-error";
    case ErrorKind::decomposition: return "decomposition-error";
    case ErrorKind::empty_accumulator: return "empty-accumulator";
    case ErrorKind::degenerate_input: return "degenerate-input";
    case ErrorKind::degenerate_surface: return "degenerate-surface";
    case ErrorKind::insufficient_reference: return "insufficient-reference";
    case ErrorKind::no_mismatch_pool: return "no-mismatch-pool";
    case ErrorKind::lookup: return "lookup-error";
    case ErrorKind::config: return "config-error";
    case ErrorKind::io: return "io-error";
  }
  return "error";
}

// Every failure surfaced by the library carries a machine-readable kind.
// what() is "<kind>: <detail>" so CLI diagnostics can be grepped.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InsufficientReferenceError : public Error {
 public:
  InsufficientReferenceError(const std::string& user, std::size_t shortfall)
      : Error(ErrorKind::insufficient_reference,
              "user '" + user + "' is " + std::to_string(shortfall) +
                  " zoom-free image(s) short of the reference minimum"),
        shortfall_(shortfall) {}

  std::size_t shortfall() const noexcept { return shortfall_; }

 private:
  std::size_t shortfall_;
};

}  // namespace prnulab
