#pragma once

#include <stdexcept>
#include <string>

namespace osteoforge {

enum class ErrorKind {
  kValidation,  // malformed or out-of-contract input
  kGeometry,    // volumes/masks that should share a grid do not
  kIo,          // file system failures
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ErrorKind::kValidation, what) {}
};

class GeometryError : public Error {
 public:
  explicit GeometryError(const std::string& what)
      : Error(ErrorKind::kGeometry, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace osteoforge
