#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace crl {

/// Malformed network or observation text. Carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A structural invariant of a network or observation does not hold.
class InvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The value-function system has no valid solution (non-positive or non-finite z,
/// singular system, or divergent value iteration). This is the documented failure
/// mode of the unconstrained model on cyclic networks with large utilities.
class SolveFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Path enumeration hit its cap; results would otherwise be silently truncated.
class PathOverflow : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Extended state space exceeded the configured state cap.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One or more observations have probability zero under the configured constraint.
class InfeasibleObservation : public std::runtime_error {
public:
    InfeasibleObservation(std::vector<std::size_t> indices, const std::string& what)
        : std::runtime_error(what), indices_(std::move(indices)) {}

    const std::vector<std::size_t>& indices() const noexcept { return indices_; }

private:
    std::vector<std::size_t> indices_;
};

}  // namespace crl
