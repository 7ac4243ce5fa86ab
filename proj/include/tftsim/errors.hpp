#pragma once

#include <stdexcept>
#include <string>

namespace tft {

// Invalid user input: bad parameters, unknown names, schema violations.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical procedure failed to meet its convergence or validity gate.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace tft
