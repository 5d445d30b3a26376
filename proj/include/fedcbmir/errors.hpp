#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedcbmir {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/length disagreement between operands.
struct DimensionError : Error {
  using Error::Error;
};

// Caller violated a documented precondition (K <= 0, empty hits, ...).
struct ContractError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  using Error::Error;
};

struct ProtocolError : Error {
  using Error::Error;
};

// A round could not complete; no partial aggregation happened.
struct RoundAborted : ProtocolError {
  RoundAborted(std::size_t round, const std::string& why)
      : ProtocolError("round " + std::to_string(round) + " aborted: " + why),
        round(round) {}
  std::size_t round;
};

enum class DecodeFault {
  bad_magic,
  bad_version,
  layout_mismatch,
  truncated,
  length_mismatch,
  unknown_type,
  malformed,
};

inline const char* to_string(DecodeFault f) {
  switch (f) {
    case DecodeFault::bad_magic: return "bad magic";
    case DecodeFault::bad_version: return "unsupported version";
    case DecodeFault::layout_mismatch: return "layout-id mismatch";
    case DecodeFault::truncated: return "truncated";
    case DecodeFault::length_mismatch: return "length mismatch";
    case DecodeFault::unknown_type: return "unknown message type";
    case DecodeFault::malformed: return "malformed";
  }
  return "?";
}

struct DecodeError : Error {
  DecodeError(DecodeFault fault, const std::string& detail)
      : Error(std::string(to_string(fault)) + ": " + detail), fault(fault) {}
  DecodeFault fault;
};

// Data-side failures: unreadable files, bad manifests, index problems.
struct DataError : Error {
  using Error::Error;
};

struct LoadError : DataError {
  using DataError::DataError;
};

struct ManifestError : DataError {
  ManifestError(std::size_t line, const std::string& what)
      : DataError("manifest line " + std::to_string(line) + ": " + what),
        line(line) {}
  std::size_t line;
};

struct IndexError : DataError {
  using DataError::DataError;
};

struct EmptyPartitionError : DataError {
  using DataError::DataError;
};

struct EvalError : DataError {
  using DataError::DataError;
};

struct IoError : DataError {
  using DataError::DataError;
};

}  // namespace fedcbmir
