#pragma once

#include <stdexcept>
#include <string>

namespace slotnoise {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad flags, missing assets, invalid templates or configs. CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or invalid input data. CLI exit code 1.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public DataError {
 public:
  ValidationError(const std::string& example_id, const std::string& what)
      : DataError("example '" + example_id + "': " + what), example_id_(example_id) {}

  const std::string& example_id() const { return example_id_; }

 private:
  std::string example_id_;
};

// A remote service (model endpoint, paraphrase or embedding provider) failed.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& endpoint, const std::string& what, int status = 0)
      : Error(endpoint + ": " + what), endpoint_(endpoint), status_(status) {}

  const std::string& endpoint() const { return endpoint_; }
  // HTTP status, or 0 when no response was received.
  int status() const { return status_; }

 private:
  std::string endpoint_;
  int status_;
};

}  // namespace slotnoise
