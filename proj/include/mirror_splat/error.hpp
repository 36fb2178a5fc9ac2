#pragma once

#include <stdexcept>
#include <string>

namespace mirror_splat {

// Base of every error thrown by the library. `category()` lets the CLI map
// failures onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  enum class Category { config, data, training, geometry, render };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

class InvalidPlane : public Error {
 public:
  explicit InvalidPlane(const std::string& what) : Error(Category::geometry, what) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(Category::geometry, what) {}
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& what) : Error(Category::render, what) {}
};

class RenderError : public Error {
 public:
  explicit RenderError(const std::string& what) : Error(Category::render, what) {}
};

class LoadError : public Error {
 public:
  explicit LoadError(const std::string& what) : Error(Category::data, what) {}
};

class VersionError : public LoadError {
 public:
  explicit VersionError(const std::string& what) : LoadError(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Category::data, what) {}
};

class SynthesisError : public Error {
 public:
  explicit SynthesisError(const std::string& what) : Error(Category::data, what) {}
};

class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& what) : Error(Category::training, what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error(Category::training, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::config, what) {}
};

}  // namespace mirror_splat
