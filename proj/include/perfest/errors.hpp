#pragma once

#include <stdexcept>
#include <string>

namespace perfest {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input values (bad ranges, length mismatches, non-finite data).
struct ValidationError : Error {
    using Error::Error;
};

// Column layout of a file does not match the declared schema.
struct SchemaError : Error {
    using Error::Error;
};

// File system / parsing failures.
struct IoError : Error {
    using Error::Error;
};

// Training targets collapse to a single class (or a class has zero total weight).
struct DegenerateTargetError : Error {
    using Error::Error;
};

// Least-squares fit has no unique solution (constant regressor).
struct SingularFitError : Error {
    using Error::Error;
};

// Requested metric has no defined value on the given data (e.g. AUROC with one class).
struct UndefinedMetricError : Error {
    using Error::Error;
};

// Bootstrap standard error could not be computed for a case.
struct SeUndefinedError : Error {
    using Error::Error;
};

}  // namespace perfest
