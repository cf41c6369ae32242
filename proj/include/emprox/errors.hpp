#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace emprox {

// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class VocabularyError : public Error {
 public:
  explicit VocabularyError(const std::string& op)
      : Error("unknown operation '" + op + "'"), op_(op) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DegenerateEmbeddingError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergenceError : public Error {
 public:
  explicit TrainingDivergenceError(int epoch)
      : Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class NotFittedError : public Error {
 public:
  using Error::Error;
};

class UndefinedCorrelationError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Row-level problem in a benchmark file; line numbers are 1-based and count the header.
class RowError : public Error {
 public:
  RowError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateError : public Error {
 public:
  explicit DuplicateError(const std::string& arch)
      : Error("duplicate architecture '" + arch + "'"), arch_(arch) {}
  const std::string& arch() const noexcept { return arch_; }

 private:
  std::string arch_;
};

}  // namespace emprox
