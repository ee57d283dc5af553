#pragma once

#include <stdexcept>
#include <string>

namespace c3dr {

// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Invalid depth handed to back-projection.
class RejectedPointError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  LoadError(const std::string& file, const std::string& field, const std::string& what)
      : Error(file + ": " + field + ": " + what), file_(file), field_(field) {}

  const std::string& file() const { return file_; }
  const std::string& field() const { return field_; }

 private:
  std::string file_;
  std::string field_;
};

class WriteError : public Error {
 public:
  using Error::Error;
};

class DiscoveryError : public Error {
 public:
  using Error::Error;
};

class EmptyTrackError : public Error {
 public:
  using Error::Error;
};

class DensityUndefinedError : public Error {
 public:
  using Error::Error;
};

class EmptySurfaceError : public Error {
 public:
  using Error::Error;
};

class SelectionError : public Error {
 public:
  using Error::Error;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

class AssetGenerationError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class RefinementError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace c3dr
