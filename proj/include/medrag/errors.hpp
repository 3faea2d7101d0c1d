#pragma once

#include <stdexcept>
#include <string>

namespace medrag {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (bad JSON line, non-integer grade, bad header).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that violates a data invariant (duplicate id, negative
/// grade, wrong embedding dimension).
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// Caller supplied an argument outside the operation's domain.
class InputError : public Error {
public:
    using Error::Error;
};

/// A remote backend could not be reached or kept failing after retries.
class TransportError : public Error {
public:
    using Error::Error;
};

/// The generation backend answered with an empty completion or a refusal.
class EmptyAnswerError : public Error {
public:
    using Error::Error;
};

/// Bad configuration or command-line usage.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace medrag
