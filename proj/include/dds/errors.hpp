#pragma once

#include <stdexcept>
#include <string>

namespace dds {

/// Base class for all simulator errors.
struct SimError : std::runtime_error {
    explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

/// A config or input state failed validation before reaching an engine.
struct ValidationError : SimError {
    using SimError::SimError;
};

/// A time step would violate the explicit-scheme stability bound.
struct StabilityError : SimError {
    using SimError::SimError;
};

/// A simplex left the domain and no wall was there to reflect it.
struct DomainEscapeError : SimError {
    using SimError::SimError;
};

/// An operation requires a domain topology (e.g. periodic) the state lacks.
struct TopologyError : SimError {
    using SimError::SimError;
};

/// A requested computation would exceed the configured resource budget.
struct InfeasibleError : SimError {
    using SimError::SimError;
};

} // namespace dds
