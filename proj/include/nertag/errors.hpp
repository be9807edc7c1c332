#pragma once

#include <stdexcept>
#include <string>

namespace nertag {

// Broad failure classes; the CLI maps them onto its exit codes.
enum class ErrorKind { kUsage = 1, kData = 2, kNumeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Invalid argument values (empty type names, out-of-range indices, ...).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::kData, message) {}
};

// A tag sequence that breaks the BIO rules under strict handling.
class SchemeViolation : public Error {
 public:
  SchemeViolation(const std::string& message, std::size_t position)
      : Error(ErrorKind::kData, message), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Malformed corpus, embedding, or checkpoint input.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& message)
      : Error(ErrorKind::kData, message) {}
};

// Incompatible matrix/tensor shapes or vocabulary sizes.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message)
      : Error(ErrorKind::kData, message) {}
};

// NaN/inf in gradients or losses.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message)
      : Error(ErrorKind::kNumeric, message) {}
};

}  // namespace nertag
