#pragma once

#include <stdexcept>
#include <string>

namespace njtv {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : Error {
  using Error::Error;
};

// Malformed or unsupported file contents.
struct FormatError : Error {
  using Error::Error;
};

// Input outside an operation's mathematical domain (non-rigid matrix,
// degenerate histogram, invalid bracket, ...).
struct DomainError : Error {
  using Error::Error;
};

}  // namespace njtv
