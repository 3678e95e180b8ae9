#pragma once

#include <stdexcept>
#include <string>

namespace hardhat {

// Base for everything the library throws on bad input. The CLI maps
// ValidationError/IntegrityError/ParseError to exit code 1 and IoError to 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value violates a documented precondition (score outside [0,1], ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Cross-record references do not resolve (dangling image/category ids, ...).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// A file is not well-formed; the message names the offending record.
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// An oracle was asked to enumerate a scene beyond its size bounds.
class BoundsError : public Error {
 public:
  using Error::Error;
};

}  // namespace hardhat
