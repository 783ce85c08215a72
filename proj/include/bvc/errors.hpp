#pragma once

#include <stdexcept>
#include <string>

namespace bvc {

// Bad parameters, malformed configuration, missing inputs, horizon misuse.
// The CLI maps these to exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// The inputs violate a hypothesis of the theory being tested (uncertified
// rate, polynomial tail exponent <= 2, no valid n0, ...). The CLI maps these
// to exit code 3 so scripts can tell "you misconfigured" from "the theorem
// does not apply here".
class hypothesis_error : public std::runtime_error {
public:
    explicit hypothesis_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace bvc
