#pragma once

#include <stdexcept>
#include <string>

namespace obfdetect {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invariant violation in an IR value (bad arity, dangling target, ...).
class MalformedIR : public Error {
 public:
  using Error::Error;
};

// Input data that cannot be used: unreadable files, bad manifests, empty sets.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace obfdetect
