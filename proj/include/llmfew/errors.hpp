#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace llmfew {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed `.ts` header or data token.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A data row whose channel count disagrees with the header.
class StructuralError : public Error {
 public:
  StructuralError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class AlreadyAdaptedError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class TrainingAborted : public Error {
 public:
  TrainingAborted(int epoch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace llmfew
