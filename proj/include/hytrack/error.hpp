#pragma once

#include <stdexcept>
#include <string>

namespace hytrack {

// Base of every error the library throws. what() is prefixed with the
// module that raised it, e.g. "babs: neighborhood region is empty".
class Error : public std::runtime_error {
 public:
  Error(const std::string& module, const std::string& msg)
      : std::runtime_error(module + ": " + msg), module_(module), message_(msg) {}

  const std::string& module() const noexcept { return module_; }
  // what() without the module prefix
  const std::string& message() const noexcept { return message_; }

 private:
  std::string module_;
  std::string message_;
};

// Malformed input file or buffer.
class FormatError : public Error {
  using Error::Error;
};

// Caller violated a documented precondition.
class ArgumentError : public Error {
  using Error::Error;
};

// Box/region geometry leaves nothing to work with.
class GeometryError : public Error {
  using Error::Error;
};

// Missing or inconsistent data (frames, detections).
class DataError : public Error {
  using Error::Error;
};

class NumericError : public Error {
  using Error::Error;
};

class WeightsFormatError : public Error {
  using Error::Error;
};

class SamplingError : public Error {
  using Error::Error;
};

class ConfigError : public Error {
  using Error::Error;
};

class TrainingDivergence : public Error {
 public:
  TrainingDivergence(int iteration, const std::string& msg)
      : Error("classifier", msg + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace hytrack
