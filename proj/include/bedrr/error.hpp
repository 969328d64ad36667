#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bedrr {

// Base class for every error raised by the library. The CLI maps ConfigError
// to exit code 1 and every other Error to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define BEDRR_DEFINE_ERROR(Name)             \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

BEDRR_DEFINE_ERROR(InvalidSample);
BEDRR_DEFINE_ERROR(TooShort);
BEDRR_DEFINE_ERROR(OutOfRange);
BEDRR_DEFINE_ERROR(InsufficientData);
BEDRR_DEFINE_ERROR(DimensionError);
BEDRR_DEFINE_ERROR(DegenerateLabels);
BEDRR_DEFINE_ERROR(OrderingError);
BEDRR_DEFINE_ERROR(NoEstimate);
BEDRR_DEFINE_ERROR(ConfigError);
BEDRR_DEFINE_ERROR(IoError);
BEDRR_DEFINE_ERROR(ParseError);

#undef BEDRR_DEFINE_ERROR

// Raised when training produces a non-finite loss. Carries the per-epoch
// training losses recorded before the failure.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

}  // namespace bedrr
