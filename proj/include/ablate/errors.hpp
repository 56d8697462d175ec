#pragma once

#include <stdexcept>
#include <string>

namespace ablate {

// Base class for all engine failures.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Unusable study configuration (bad file, schema violation, missing input).
// The CLI maps this to exit code 2; everything else maps to exit code 1.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Operation called out of order on a stateful object (workspace lifecycle).
class StateError : public Error {
public:
    explicit StateError(const std::string& msg) : Error(msg) {}
};

}  // namespace ablate
