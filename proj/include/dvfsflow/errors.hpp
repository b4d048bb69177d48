#pragma once

#include <stdexcept>
#include <string>

namespace dvfsflow {

enum class ErrorKind { config, domain, numeric, state, insufficient_data, io };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "configuration error";
    case ErrorKind::domain: return "domain error";
    case ErrorKind::numeric: return "numeric error";
    case ErrorKind::state: return "state error";
    case ErrorKind::insufficient_data: return "insufficient data";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

// Every failure raised by the library carries a category so callers (the CLI
// in particular) can map it to an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Configuration errors also name the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(ErrorKind::config, "'" + field + "' " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

struct StateError : Error {
  explicit StateError(const std::string& what) : Error(ErrorKind::state, what) {}
};

struct InsufficientDataError : Error {
  explicit InsufficientDataError(const std::string& what)
      : Error(ErrorKind::insufficient_data, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace dvfsflow
