#pragma once

#include <stdexcept>
#include <string>

namespace ltc {

// Every error raised by the library derives from Error so callers (the CLI in
// particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: dimension/family mismatch, bad parameters, caps.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Invalid input values such as non-finite coordinates or shape mismatches.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Out-of-domain arguments to closed-form formulas.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its contract (wrong mode, budgets too small).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Encoder/decoder disagreement about shared randomness.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// The brute-force oracle found no lattice point inside the requested radius.
class OracleError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine produced something it cannot recover from.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ltc
