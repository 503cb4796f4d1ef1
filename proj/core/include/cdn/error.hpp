#pragma once

#include <stdexcept>
#include <string>

namespace cdn {

/// Bad configuration or CLI input. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed annotation, prediction or class-table file.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& file, std::size_t line, const std::string& field,
            const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": field '" + field +
                           "': " + what),
        file_(file), line_(line), field_(field) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::string file_;
  std::size_t line_;
  std::string field_;
};

/// Non-finite loss or gradient. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shape or contract violation between modules.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace cdn
