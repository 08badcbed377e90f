#pragma once

#include <stdexcept>
#include <string>

namespace qcoh {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A chain site index outside [1, n_sites], or a repeated defect site.
class InvalidSiteError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent model pieces (dimension mismatch, bad parameter values).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// The requested operation exceeds a configured size limit.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Not enough levels / samples for a statistically meaningful result.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// An input violates a documented precondition (e.g. non-Hermitian matrix).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A windowed eigensystem misses too much spectral weight.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// A closed-form prediction divides by a quantity close to zero.
class NearSingularityError : public Error {
 public:
  using Error::Error;
};

/// A smooth curve was evaluated outside its support.
class ExtrapolationError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration. Carries the offending key.
class ParseError : public Error {
 public:
  ParseError(std::string key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace qcoh
