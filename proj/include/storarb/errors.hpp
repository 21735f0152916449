// Exception types shared by the library and mapped to CLI exit codes.
#ifndef STORARB_ERRORS_HPP
#define STORARB_ERRORS_HPP

#include <stdexcept>
#include <string>

#include "storarb/conic.hpp"

namespace storarb {

/// Bad or unusable input data (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  enum class Kind { MalformedRow, DuplicateTimestamp, EmptyTrainSet, TooFewSamples, Io };

  DataError(Kind kind, std::string what, long row = 0)
      : std::runtime_error(std::move(what)), kind_(kind), row_(row) {}

  Kind kind() const { return kind_; }
  /// 1-based data row for row-level errors, 0 otherwise.
  long row() const { return row_; }

 private:
  Kind kind_;
  long row_;
};

/// A conic solve did not end Optimal (CLI exit code 4).
class SolverError : public std::runtime_error {
 public:
  SolverError(SolveStatus status, const std::string& what)
      : std::runtime_error(what), status_(status) {}

  SolveStatus status() const { return status_; }

 private:
  SolveStatus status_;
};

}  // namespace storarb

#endif  // STORARB_ERRORS_HPP
