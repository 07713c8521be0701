#pragma once

#include <stdexcept>
#include <string>

namespace plangen {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape disagreement between operands.
struct DimensionError : Error {
    using Error::Error;
};

// Input outside an operation's mathematical domain (e.g. log of non-positive).
struct DomainError : Error {
    using Error::Error;
};

// Caller violated an operation's stated precondition.
struct ContractError : Error {
    using Error::Error;
};

// Token id outside the declared vocabulary.
struct VocabError : Error {
    using Error::Error;
};

// Bad user-supplied configuration, path, or file content.
struct ConfigError : Error {
    using Error::Error;
};

// Non-finite value detected during training; message carries step diagnostics.
struct NumericError : Error {
    using Error::Error;
};

// A verification oracle detected it cannot produce a valid answer
// (e.g. the function under finite-difference check is non-deterministic).
struct OracleError : Error {
    using Error::Error;
};

}  // namespace plangen
