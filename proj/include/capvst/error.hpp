#pragma once

#include <stdexcept>
#include <string>

namespace capvst {

// Every failure raised by the library derives from Error so callers can catch
// one type and still report the stage that failed.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace capvst
