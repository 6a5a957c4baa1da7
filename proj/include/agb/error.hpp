#pragma once

#include <stdexcept>
#include <string>

namespace agb {

// Exception families map onto the CLI exit codes: configuration problems (2),
// bad or insufficient data (3) and numerical failures (4).

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace agb
