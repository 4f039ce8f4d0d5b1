#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aspectseed {

// Base of every error raised by the library. The CLI prints what() on one line.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }
  const char* kind() const noexcept override { return "parse"; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "validation"; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric"; }
};

class TrainingError : public Error {
 public:
  TrainingError(std::size_t epoch, std::size_t batch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch) + ": " + what),
        epoch_(epoch),
        batch_(batch) {}
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }
  const char* kind() const noexcept override { return "training"; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

}  // namespace aspectseed

namespace aspectseed {

// A pipeline stage failed; what() names the stage and the underlying error.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& kind, const std::string& what)
      : Error("stage '" + stage + "' failed (" + kind + "): " + what), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }
  const char* kind() const noexcept override { return "stage"; }

 private:
  std::string stage_;
};

}  // namespace aspectseed
