#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chessbench {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A move that is not legal in the position it was applied to.
class IllegalMove : public Error {
 public:
  using Error::Error;
};

// Invalid position construction (bad king count, impossible en passant, ...).
class PositionError : public Error {
 public:
  using Error::Error;
};

class FenError : public Error {
 public:
  FenError(const std::string& what, std::string field, std::size_t offset)
      : Error(what), field_(std::move(field)), offset_(offset) {}
  // Which of the six FEN fields was malformed ("placement", "side", ...).
  const std::string& field() const { return field_; }
  // Byte offset of the offending field in the input string.
  std::size_t offset() const { return offset_; }

 private:
  std::string field_;
  std::size_t offset_;
};

class SanError : public Error {
 public:
  using Error::Error;
};

class UciError : public Error {
 public:
  UciError(const std::string& what, std::size_t token_index)
      : Error(what), token_index_(token_index) {}
  // 0-based index of the offending move token.
  std::size_t token_index() const { return token_index_; }

 private:
  std::size_t token_index_;
};

class PgnError : public Error {
 public:
  PgnError(const std::string& what, int line, int column)
      : Error(what), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// History handed to the encoder is not a chain of legal transitions.
class InvalidHistory : public Error {
 public:
  using Error::Error;
};

// --- engine-client -----------------------------------------------------

class EngineError : public Error {
 public:
  using Error::Error;
};

class SpawnError : public EngineError {
 public:
  using EngineError::EngineError;
};

class HandshakeTimeout : public EngineError {
 public:
  using EngineError::EngineError;
};

class ProtocolViolation : public EngineError {
 public:
  using EngineError::EngineError;
};

class EngineTimeout : public EngineError {
 public:
  using EngineError::EngineError;
};

class EngineParseError : public EngineError {
 public:
  using EngineError::EngineError;
};

// --- model-client -------------------------------------------------------

class HttpError : public Error {
 public:
  HttpError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_ = 0;
};

class EndpointTimeout : public Error {
 public:
  using Error::Error;
};

class RateLimited : public Error {
 public:
  using Error::Error;
};

// --- scoring / taskgen ---------------------------------------------------

// The model's choice-score map does not cover every instance choice.
class MissingChoice : public Error {
 public:
  using Error::Error;
};

// No mating move exists at the requested cut.
class NoMateAvailable : public Error {
 public:
  using Error::Error;
};

}  // namespace chessbench
