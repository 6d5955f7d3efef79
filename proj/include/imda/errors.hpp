#pragma once

#include <stdexcept>
#include <string>

namespace imda {

// Shape mismatches and invalid hyperparameters map to CLI exit code 1.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// File/stream failures map to CLI exit code 2.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// NaN/Inf in a loss term or a degenerate norm maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace imda
