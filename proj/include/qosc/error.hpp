#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qosc {

enum class ErrorKind {
  unknown_concept,
  unknown_parameter,
  unknown_atom,
  parse,
  validation,
  io,
  no_solution,
  timeout,
  stale_hierarchy,
  precondition,
  argument,
  config_infeasible,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::unknown_concept: return "unknown-concept";
    case ErrorKind::unknown_parameter: return "unknown-parameter";
    case ErrorKind::unknown_atom: return "unknown-atom";
    case ErrorKind::parse: return "parse-error";
    case ErrorKind::validation: return "validation-error";
    case ErrorKind::io: return "io-error";
    case ErrorKind::no_solution: return "no-solution";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::stale_hierarchy: return "stale-hierarchy";
    case ErrorKind::precondition: return "precondition-violation";
    case ErrorKind::argument: return "argument-error";
    case ErrorKind::config_infeasible: return "config-infeasible";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Carries every violation found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : Error(ErrorKind::validation, join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += "; ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> violations_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(ErrorKind::parse, what + " (line " + std::to_string(line) + ", column " +
                                    std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace qosc
