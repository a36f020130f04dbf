#pragma once

#include <stdexcept>
#include <string>

namespace shad3s {

/// Argument outside its documented domain (e.g. max_solids not in [1,6]).
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed external data: image sizes, checkpoint wiring, file layouts.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scene text that does not match the grammar. Carries a 1-based position.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column)
      : std::runtime_error(what + " at " + std::to_string(line) + ":" + std::to_string(column)),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

/// Scene text that parses but violates a geometric invariant.
class SemanticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Referenced model, texture family or file that does not exist.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training stopped because a loss stopped being finite.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace shad3s
