#pragma once

#include <stdexcept>
#include <string>

namespace karum {

// Base class for every error this library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input records: bad JSON, missing or mistyped fields, duplicate ids.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration (hyperparameters, paths, incompatible options).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A name, letter, or mention that does not exist in the corpus.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

// File could not be written or read back.
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or failed numerical routines; carries diagnostic context.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// An internal consistency check failed (counts out of sync with assignments).
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace karum
