#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace formcheck {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite numbers, empty inputs, out-of-range values.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatches between objects that must agree (joint counts, vector lengths).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Invalid or unsatisfiable configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Training labels contain a single class.
class DegenerateLabelsError : public Error {
 public:
  using Error::Error;
};

/// No training sample is labeled for the requested pattern.
class NoDataError : public Error {
 public:
  using Error::Error;
};

/// The segmentation state machine stopped before reaching wrap_up.
class SegmentationError : public Error {
 public:
  SegmentationError(const std::string& last_state, const std::string& what)
      : Error(what), last_state_(last_state) {}
  const std::string& last_state() const noexcept { return last_state_; }

 private:
  std::string last_state_;
};

/// Malformed file content. `line()` is 1-based, 0 when not line specific.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class FormatVersionError : public Error {
 public:
  using Error::Error;
};

/// Model bundle does not match the data it is used with.
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace formcheck
