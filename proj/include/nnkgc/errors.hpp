#pragma once

#include <stdexcept>
#include <string>

namespace nnkgc {

// Shapes of the operands do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input outside the mathematical domain of an op (log of a non-positive value, exp overflow).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A precondition of an API was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// softmax over a row whose entries are all masked out.
class DegenerateRowError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Bad configuration value or key. Maps to exit code 1 in the CLI.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dataset problems found while loading or validating. Maps to exit code 1 in the CLI.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DatasetError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : DatasetError(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class MissingMetadataError : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace nnkgc
