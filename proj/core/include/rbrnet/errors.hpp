#pragma once

#include <stdexcept>
#include <string>

namespace rbrnet {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Incompatible tensor shapes (dimension mismatch, window larger than input, ...).
class ShapeError : public Error {
  public:
    using Error::Error;
};

/// Element-count mismatch between a buffer and a shape.
class SizeError : public Error {
  public:
    using Error::Error;
};

/// Invalid argument value: bad rate, label out of range, malformed config.
class ValueError : public Error {
  public:
    using Error::Error;
};

/// Autodiff misuse: non-scalar loss, loss not produced on the tape.
class GraphError : public Error {
  public:
    using Error::Error;
};

/// Non-finite values where finite ones are required (NaN gradient, NaN loss).
class NumericError : public Error {
  public:
    using Error::Error;
};

/// Dataset problems: empty class directory, undecodable corpus, bad split.
class DataError : public Error {
  public:
    using Error::Error;
};

/// A ROC/PR curve that is undefined for the given inputs.
class CurveError : public Error {
  public:
    using Error::Error;
};

/// Checkpoint / cache container failures, with the failure class attached.
class CheckpointError : public Error {
  public:
    enum class Kind { Io, BadMagic, BadVersion, BadCrc, BadShape, BadSidecar };

    CheckpointError(Kind kind, const std::string& msg) : Error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

}  // namespace rbrnet
