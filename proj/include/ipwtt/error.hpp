#ifndef IPWTT_ERROR_HPP
#define IPWTT_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ipwtt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A mapped CSV column is missing from the header.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A cell could not be parsed. `row()` is the 1-based data row number.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Structural sample violation (too few rows, an empty treatment arm, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside a function's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A propensity probability is 0 or 1 at machine precision.
class DegenerateProbabilityError : public Error {
 public:
  using Error::Error;
};

/// The treatment indicator is perfectly separated by the covariates.
class SeparationError : public Error {
 public:
  using Error::Error;
};

/// An information matrix could not be inverted reliably.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// A trimming or tail fractile is out of range for the sample at hand.
class FractileError : public Error {
 public:
  using Error::Error;
};

/// All top-m tail values are equal, so the Hill log-spacing is zero.
class DegenerateTailError : public Error {
 public:
  using Error::Error;
};

/// A fitted tail index is <= 1; the truncated tail mean does not exist.
class InfeasibleBiasError : public Error {
 public:
  using Error::Error;
};

/// A required input state is missing (e.g. an unconverged propensity fit).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A zero scale was supplied where a studentization needs a positive one.
class DegenerateScaleError : public Error {
 public:
  using Error::Error;
};

}  // namespace ipwtt

#endif  // IPWTT_ERROR_HPP
