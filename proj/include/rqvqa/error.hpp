// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rqvqa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed bracketed tree text. `offset` is the byte offset of the problem.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Caller passed something outside an operation's contract.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Bad dataset, fixture or config file content.
class InputError : public Error {
 public:
  using Error::Error;
};

/// LLM transport failure. `status` is the HTTP status, 0 for connection-level errors.
class TransportError : public Error {
 public:
  TransportError(int status, const std::string& reason)
      : Error(status == 0 ? "transport error: " + reason
                          : "HTTP " + std::to_string(status) + ": " + reason),
        status_(status),
        reason_(reason) {}

  int status() const noexcept { return status_; }
  const std::string& reason() const noexcept { return reason_; }
  bool retryable() const noexcept { return status_ == 0 || status_ == 429 || status_ >= 500; }

 private:
  int status_;
  std::string reason_;
};

}  // namespace rqvqa
