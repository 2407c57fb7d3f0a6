#pragma once

#include <stdexcept>
#include <string>

namespace tslab {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not agree with an operation's requirements.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A precondition of an API call was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Lag tokenization requested on a series shorter than the largest lag.
class InsufficientHistoryError : public Error {
 public:
  using Error::Error;
};

// Pretrained vocabulary has fewer rows than the requested bin count.
class InsufficientVocabularyError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Experiment configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input data file (dataset CSV, loss-curve CSV).
class ParseError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  enum class Kind { io, bad_magic, bad_version, truncated, unknown_tensor, shape_mismatch, missing_tensor };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace tslab
