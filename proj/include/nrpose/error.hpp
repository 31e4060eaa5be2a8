#pragma once

#include <stdexcept>
#include <string>

namespace nrpose {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent matrix or image dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid parameters or configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Request for a pose class the dictionary does not contain.
class LookupError : public Error {
public:
    using Error::Error;
};

/// Problems reading or locating input data.
class DataError : public Error {
public:
    using Error::Error;
};

class IngestionError : public DataError {
public:
    IngestionError(std::string path, const std::string& what)
        : DataError(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class ManifestError : public DataError {
public:
    using DataError::DataError;
};

/// Failure inside a numerical kernel (SVD, factorization, iteration).
class NumericalError : public Error {
public:
    using Error::Error;
};

class ConditioningError : public NumericalError {
public:
    ConditioningError(const std::string& what, double condition_estimate)
        : NumericalError(what), condition_estimate_(condition_estimate) {}
    double condition_estimate() const noexcept { return condition_estimate_; }

private:
    double condition_estimate_;
};

class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, int iteration)
        : NumericalError(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

} // namespace nrpose
