#pragma once

#include <stdexcept>
#include <string>

namespace ivdnet {

/// Raised when an argument, configuration, or input shape violates a
/// documented precondition.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on unreadable, missing, or corrupt files. The message always
/// carries the offending path.
class IoError : public std::runtime_error {
public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

}  // namespace ivdnet
