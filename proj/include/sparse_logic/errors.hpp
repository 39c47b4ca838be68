#pragma once

#include <stdexcept>
#include <string>

namespace sparse_logic {

/// Malformed or inconsistent input data (bad JSON, invalid decomposition, ...).
class validation_error : public std::runtime_error {
public:
    explicit validation_error(const std::string& what) : std::runtime_error(what) {}
};

/// A caller broke a documented precondition.
class contract_error : public std::runtime_error {
public:
    explicit contract_error(const std::string& what) : std::runtime_error(what) {}
};

/// An exact search or exhaustive enumeration exceeded its configured budget.
class capacity_error : public std::runtime_error {
public:
    explicit capacity_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace sparse_logic
