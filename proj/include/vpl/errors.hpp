#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace vpl {

/// Raised when a configuration cannot be used (bad optics, layout or kernel sizes).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Location of a failing (fov, channel) task inside a PsfGrid build.
struct GridLocation {
  int fov = 0;
  int channel = 0;
};

/// Base for errors that build_psf_grid re-raises annotated with a location.
class LocatedError : public std::runtime_error {
 public:
  explicit LocatedError(const std::string& what, std::optional<GridLocation> where = std::nullopt)
      : std::runtime_error(what), where_(where) {}

  const std::optional<GridLocation>& where() const noexcept { return where_; }

 private:
  std::optional<GridLocation> where_;
};

/// The crop discarded more PSF energy than the configured threshold allows.
class TruncationError : public LocatedError {
 public:
  using LocatedError::LocatedError;
};

/// A zero-width PSF cannot be magnified to a non-zero radius.
class DegenerateInputError : public LocatedError {
 public:
  using LocatedError::LocatedError;
};

/// A feature column with (numerically) zero norm has no direction.
class DegenerateFeatureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No class had a defined IoU.
class EmptyEvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File contents did not match the expected format.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vpl
