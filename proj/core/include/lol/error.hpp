#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "lol/common.hpp"

namespace lol {

enum class ErrorKind {
  validation,
  configuration,
  io,
  ingestion,
  prefix_not_found,
  layer_not_dumped,
  context_overflow,
  training_diverged,
  runtime,
};

std::string_view to_string(ErrorKind kind);

// Base of every error thrown by the library. The kind is stable and
// machine-readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // True for failures caused by bad input or configuration rather than
  // by something going wrong while running.
  bool is_validation() const noexcept {
    return kind_ == ErrorKind::validation || kind_ == ErrorKind::configuration ||
           kind_ == ErrorKind::ingestion;
  }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message)
      : Error(ErrorKind::validation, message) {}
};

class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& message)
      : Error(ErrorKind::configuration, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

class IngestionError : public Error {
 public:
  explicit IngestionError(const std::string& message)
      : Error(ErrorKind::ingestion, message) {}
};

class TrainingDivergedError : public Error {
 public:
  explicit TrainingDivergedError(const std::string& message)
      : Error(ErrorKind::training_diverged, message) {}
};

class PrefixNotFoundError : public Error {
 public:
  explicit PrefixNotFoundError(TokenSequence prefix);
  const TokenSequence& prefix() const noexcept { return prefix_; }

 private:
  TokenSequence prefix_;
};

class LayerNotDumpedError : public Error {
 public:
  explicit LayerNotDumpedError(LayerIndex layer);
  LayerIndex layer() const noexcept { return layer_; }

 private:
  LayerIndex layer_;
};

class ContextOverflowError : public Error {
 public:
  ContextOverflowError(std::size_t length, std::size_t limit);
  // Tokens produced before the overflow, when raised mid-generation.
  const TokenSequence& partial() const noexcept { return partial_; }
  void set_partial(TokenSequence partial) { partial_ = std::move(partial); }

 private:
  TokenSequence partial_;
};

std::string format_tokens(const TokenSequence& tokens);

}  // namespace lol
