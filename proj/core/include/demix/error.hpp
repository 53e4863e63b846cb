#pragma once

#include <stdexcept>
#include <string>

namespace demix {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs disagree in sample rate, channel count, or length.
class ShapeError : public Error {
 public:
  using Error::Error;
};

enum class WavErrorKind {
  kIo,
  kMalformedHeader,
  kUnsupportedEncoding,
  kTruncatedData,
};

class WavError : public Error {
 public:
  WavError(WavErrorKind kind, const std::string& path, const std::string& what)
      : Error(path + ": " + what), kind_(kind), path_(path) {}

  WavErrorKind kind() const noexcept { return kind_; }
  const std::string& path() const noexcept { return path_; }

 private:
  WavErrorKind kind_;
  std::string path_;
};

/// A separator failed. `diagnostics()` carries captured process output, if any.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, std::string diagnostics = {})
      : Error(what), diagnostics_(std::move(diagnostics)) {}

  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

class LeaderboardError : public Error {
 public:
  using Error::Error;
};

}  // namespace demix
