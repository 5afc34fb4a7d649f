#pragma once

#include <stdexcept>
#include <string>

namespace fountain {

// Caller violated a precondition (bad sizes, out-of-range parameters).
class UsageError : public std::invalid_argument {
public:
    explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

// A linear system had a zero row with a nonzero right-hand side.
class InconsistentSystem : public std::runtime_error {
public:
    explicit InconsistentSystem(const std::string& what) : std::runtime_error(what) {}
};

// Received equations contradict each other, or a repaired block does not
// match the source.
class IntegrityError : public std::runtime_error {
public:
    explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or truncated wire data.
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fountain
