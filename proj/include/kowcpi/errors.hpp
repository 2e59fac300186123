#pragma once

#include <stdexcept>
#include <string>

namespace kowcpi {

// Invalid or inconsistent run configuration. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or unusable input data (CSV files, prediction tables). Exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace kowcpi
