#pragma once

#include <stdexcept>
#include <string>

namespace kgdiv {

// Base of every error the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad or missing configuration, unknown identifiers, unusable arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Input data violates a documented schema or invariant.
class DataError : public Error {
public:
    using Error::Error;
};

// The remote side could not be reached, or kept failing after retries.
class TransportError : public Error {
public:
    using Error::Error;
};

// The remote side answered, but the payload could not be understood.
class MalformedResponse : public Error {
public:
    using Error::Error;
};

} // namespace kgdiv
