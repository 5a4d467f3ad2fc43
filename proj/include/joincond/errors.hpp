#pragma once

#include <stdexcept>
#include <string>

namespace joincond {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated a documented precondition (shape mismatch, empty input, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

/// A rank-one term or tangent basis collapsed (zero column, zero norm).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Malformed external input: JSON, CSV, command-line values.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Operation refused because the decomposition has infinite condition number.
class IllPosedError : public Error {
public:
    using Error::Error;
};

/// A constructive certificate missed its tolerances; carries what was achieved.
class CertificateError : public Error {
public:
    CertificateError(const std::string& what, double sigma_nearest, double distance_gap)
        : Error(what), sigma_nearest_(sigma_nearest), distance_gap_(distance_gap) {}

    double sigma_nearest() const noexcept { return sigma_nearest_; }
    double distance_gap() const noexcept { return distance_gap_; }

private:
    double sigma_nearest_;
    double distance_gap_;
};

} // namespace joincond
