#pragma once

#include <stdexcept>
#include <string>

namespace pseudolat {

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation not defined for this trajectory kind (e.g. revolution period of a line).
class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Anchor layout cannot determine a position (too few or degenerate anchors).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No delay-profile peak qualified as a first arrival.
class DetectionFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  IoError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Configuration rejected; field() is a JSON-pointer-like path such as "trajectory.radius".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace pseudolat
