#pragma once

#include <stdexcept>
#include <string>

namespace advgrid {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or a violated type invariant.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Block geometry cannot be realised (cells smaller than one pixel, box too small).
class GeometryError : public Error {
public:
    using Error::Error;
};

class BudgetExhausted : public Error {
public:
    using Error::Error;
};

/// The detector backend could not be reached or died mid-request.
class TransportError : public Error {
public:
    using Error::Error;
};

/// The detector backend answered with something that is not a valid response.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace advgrid
