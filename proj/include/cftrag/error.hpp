#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cftrag {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant was violated; indicates a bug or adversarial hashing.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(std::string path, std::size_t line, const std::string& what)
      : DataError(path + ":" + std::to_string(line) + ": " + what),
        path_(std::move(path)),
        line_(line) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

class MultipleParents : public DataError {
 public:
  MultipleParents(std::string label, std::uint64_t tree_id)
      : DataError("entity '" + label + "' has more than one parent in tree " +
                  std::to_string(tree_id)),
        label_(std::move(label)),
        tree_id_(tree_id) {}

  const std::string& label() const noexcept { return label_; }
  std::uint64_t tree_id() const noexcept { return tree_id_; }

 private:
  std::string label_;
  std::uint64_t tree_id_;
};

class InvalidAddress : public DataError {
 public:
  using DataError::DataError;
};

/// A block-list address does not exist in the forest the index is used with.
class StaleAddress : public DataError {
 public:
  using DataError::DataError;
};

class BadTemplate : public DataError {
 public:
  using DataError::DataError;
};

class ExpansionFailed : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

}  // namespace cftrag
