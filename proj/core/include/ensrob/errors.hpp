#pragma once

#include <stdexcept>
#include <string>

namespace ensrob {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };      // bad parameters or config files
struct ShapeError : Error { using Error::Error; };       // dimension mismatch
struct NumericError : Error { using Error::Error; };     // NaN/Inf or underflow
struct FormatError : Error { using Error::Error; };      // malformed file contents
struct IoError : Error { using Error::Error; };          // unreadable/truncated files
struct ProtocolError : Error { using Error::Error; };    // incompatible ensemble members
struct GenerationError : Error { using Error::Error; };  // synthetic data infeasible
struct DomainError : Error { using Error::Error; };      // argument outside math domain
struct OracleScopeError : Error { using Error::Error; }; // brute-force oracle limits
struct DivergenceError : Error { using Error::Error; };  // non-finite training state

} // namespace ensrob
