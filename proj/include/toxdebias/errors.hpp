#pragma once

#include <stdexcept>
#include <string>

namespace toxdebias {

// Invalid input data: malformed records, constraint violations, missing
// prerequisites. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistic whose denominator vanished (zero variance, no negatives under a
// mask, empty group). Reports turn this into an explicit null.
class UndefinedStatistic : public DataError {
 public:
  using DataError::DataError;
};

// Bad flags or configuration values. Exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The remote translation backend could not be reached. Exit code 3.
class RemoteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace toxdebias
