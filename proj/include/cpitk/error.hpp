#pragma once

#include <stdexcept>
#include <string>

namespace cpitk {

/// Bad or insufficient input data: malformed files, missing values where
/// none are allowed, series too short, dates out of range.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A numerical procedure failed: non-convergence, singular design,
/// non-invertible filter.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cpitk
