#pragma once

#include <stdexcept>
#include <string>

namespace corrrise {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (shape mismatch, bad length, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Numerically undefined input, e.g. a zero-norm embedding handed to cosine similarity.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration values (patch larger than image, N < 2, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Unreadable inputs, malformed manifests, undecodable images.
class DataError : public Error {
public:
    using Error::Error;
};

/// The embedding backend failed while running inference or loading its model.
class BackendError : public Error {
public:
    using Error::Error;
};

class UnsupportedOperation : public Error {
public:
    using Error::Error;
};

}  // namespace corrrise
