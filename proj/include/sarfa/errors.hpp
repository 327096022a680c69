#pragma once

#include <stdexcept>
#include <string>

namespace sarfa {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition or contract was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Bad user-supplied data: malformed FEN, illegal move, schema violation.
class InputError : public Error {
 public:
  using Error::Error;
};

/// File system failures.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Action sets of the original and perturbed state are disjoint.
class NoOverlapError : public Error {
 public:
  NoOverlapError() : Error("no common actions between original and perturbed state") {}
};

/// P_rem is undefined because only the selected action exists.
class DegenerateRemError : public Error {
 public:
  DegenerateRemError() : Error("remaining-action distribution is empty") {}
};

/// Anything that goes wrong while talking to an agent: spawn, handshake,
/// timeout, malformed reply, crash.
class OracleError : public Error {
 public:
  using Error::Error;
};

class SpawnError : public OracleError {
 public:
  using OracleError::OracleError;
};

class ProtocolError : public OracleError {
 public:
  using OracleError::OracleError;
};

class TimeoutError : public OracleError {
 public:
  using OracleError::OracleError;
};

/// The queried state has no legal actions (checkmate, stalemate, terminal cell).
class TerminalStateError : public OracleError {
 public:
  using OracleError::OracleError;
};

}  // namespace sarfa
