#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace typr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Image geometry outside what the renderer can lay out (e.g. W < 6).
class InvalidGeometry : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration: missing font asset, missing truth id, invalid factor grid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary store. `offset` is the byte position where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class BuildError : public Error {
 public:
  using Error::Error;
};

class DegenerateFusion : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class UnavailableError : public Error {
 public:
  using Error::Error;
};

/// Server rejected the request (4xx); carries the server's message.
class CallerError : public Error {
 public:
  CallerError(int status, const std::string& message)
      : Error("server returned " + std::to_string(status) + ": " + message),
        status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace typr
