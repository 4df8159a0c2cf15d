#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tpsf {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid Zernike (n, m) pair or single index.
class IndexingError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (grid sizes, scenario settings, training setup).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a precondition (wrong flag, mismatched shapes).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure such as a rank-deficient normal matrix.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Input that cannot be processed meaningfully (constant image, empty object).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary input. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace tpsf
