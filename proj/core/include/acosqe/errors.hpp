#pragma once

#include <stdexcept>
#include <string>

namespace acosqe {

// Base for everything thrown on purpose.  CLI maps these onto exit codes:
// data/schema problems -> 2, numeric failures -> 3.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// -- data / schema ----------------------------------------------------------
struct DataError : Error {
  using Error::Error;
};
struct EmptyTextError : DataError {
  EmptyTextError() : DataError("empty text") {}
};
struct SchemaError : DataError {
  SchemaError(int line, const std::string& field)
      : DataError("line " + std::to_string(line) + ": bad or missing field '" + field + "'"),
        line(line), field(field) {}
  int line;
  std::string field;
};
struct SpanOutOfRangeError : DataError {
  explicit SpanOutOfRangeError(int line)
      : DataError("line " + std::to_string(line) + ": span out of token range"), line(line) {}
  int line;
};
struct UnknownCategoryError : DataError {
  UnknownCategoryError(int line, const std::string& cat)
      : DataError("line " + std::to_string(line) + ": unknown category '" + cat + "'"),
        line(line), category(cat) {}
  int line;
  std::string category;
};
struct TooManyPairsError : DataError {
  using DataError::DataError;
};
struct OverlapError : DataError {
  using DataError::DataError;
};
struct EmptyCorpusError : DataError {
  EmptyCorpusError() : DataError("corpus contains no usable sentences") {}
  explicit EmptyCorpusError(const std::string& what) : DataError(what) {}
};

// -- numerics ---------------------------------------------------------------
struct NumericError : Error {
  using Error::Error;
};
struct ShapeMismatchError : NumericError {
  using NumericError::NumericError;
};
struct OddDimensionError : NumericError {
  using NumericError::NumericError;
};
struct NonFiniteValueError : NumericError {
  using NumericError::NumericError;
};
struct EmptySequenceError : NumericError {
  EmptySequenceError() : NumericError("empty sequence") {}
  explicit EmptySequenceError(const std::string& what) : NumericError(what) {}
};
struct LabelOutOfRangeError : NumericError {
  using NumericError::NumericError;
};
struct TooLargeError : NumericError {
  using NumericError::NumericError;
};
struct StepUnderflowError : NumericError {
  using NumericError::NumericError;
};
struct NonFiniteStateError : NumericError {
  using NumericError::NumericError;
};
struct ContextOverflowError : NumericError {
  using NumericError::NumericError;
};
struct NoInputsError : NumericError {
  NoInputsError() : NumericError("no calibration inputs") {}
  explicit NoInputsError(const std::string& what) : NumericError(what) {}
};
struct SingularHessianError : NumericError {
  using NumericError::NumericError;
};
struct BudgetInfeasibleError : NumericError {
  using NumericError::NumericError;
};

}  // namespace acosqe
