#pragma once

#include <stdexcept>
#include <string>

namespace qetlab {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent configuration input.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Sender/receiver regions violate the separation rule or chain bounds.
class GeometryError : public Error {
public:
    explicit GeometryError(const std::string& what) : Error(what) {}
};

/// Ground state is degenerate (gap below threshold); the model is rejected.
class DegenerateGroundStateError : public Error {
public:
    explicit DegenerateGroundStateError(const std::string& what) : Error(what) {}
};

/// A numerical invariant that should hold by construction failed.
class InvariantError : public Error {
public:
    explicit InvariantError(const std::string& what) : Error(what) {}
};

} // namespace qetlab
