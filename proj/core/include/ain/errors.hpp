#pragma once

#include <stdexcept>
#include <string>

namespace ain {

// Inconsistent layer/kernel/config parameters (channel mismatch, bad field).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Inputs outside an operation's domain (zero extents, undersized maps).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed on-disk data.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Violated internal contract, e.g. backward() on a non-scalar root.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// NaN/Inf detected in a loss or gradient.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ain
