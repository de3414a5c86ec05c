#pragma once

#include <stdexcept>
#include <string>

namespace stratify {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input does not match the declared feature schema.
struct SchemaError : Error {
  using Error::Error;
};

/// A cell or file could not be parsed. Carries the 1-based data row when known.
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t row = 0) : Error(what), row(row) {}
  std::size_t row;
};

/// No clustering satisfies the group/pole cardinality constraints.
struct InfeasibleError : Error {
  using Error::Error;
};

/// IRLS failed to produce an increasing step, or data is separable without a ridge term.
struct ConvergenceError : Error {
  using Error::Error;
};

/// AUROC is undefined on single-class input.
struct UndefinedAurocError : Error {
  using Error::Error;
};

/// Fitting a group model inside the objective failed.
struct ObjectiveError : Error {
  ObjectiveError(const std::string& what, int group) : Error(what), group(group) {}
  int group;
};

}  // namespace stratify
