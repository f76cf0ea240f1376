#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace s2m {

// Error with a stable machine-readable code; the CLI maps these onto
// single-line {"code", "message"} JSON on stderr.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

struct IndexError : Error {
  explicit IndexError(const std::string& m) : Error("index_error", m) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& m) : Error("shape_error", m) {}
};

struct ValueError : Error {
  explicit ValueError(const std::string& m) : Error("value_error", m) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error("format_error", m) {}
};

struct LengthError : Error {
  explicit LengthError(const std::string& m) : Error("length_error", m) {}
};

struct SpecError : Error {
  explicit SpecError(const std::string& m) : Error("spec_error", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io_error", m) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config_error", m) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error("numeric_error", m) {}
};

}  // namespace s2m
