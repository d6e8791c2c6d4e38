#pragma once

#include <stdexcept>
#include <string>

namespace mcnsfv {

/// Invalid input to an operation (bad mesh size, mismatched meshes, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error("config error [" + field + "]: " + what), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Nonlinear solve did not converge even after time-step halving.
class SolverFailure : public std::runtime_error {
public:
    SolverFailure(const std::string& what, double time, double residual, int iterations)
        : std::runtime_error(what), time_(time), residual_(residual), iterations_(iterations) {}

    double time() const noexcept { return time_; }
    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double time_;
    double residual_;
    int iterations_;
};

/// Every sample of an ensemble failed, so no estimator can be formed.
class EnsembleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Payload or manifest could not be read back faithfully.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChecksumError : public FormatError {
public:
    ChecksumError(const std::string& what, long long sample_id)
        : FormatError(what), sample_id_(sample_id) {}

    /// Sample the corrupted payload belongs to, -1 for non-sample payloads.
    long long sample_id() const noexcept { return sample_id_; }

private:
    long long sample_id_;
};

class MeshMismatch : public FormatError {
public:
    using FormatError::FormatError;
};

} // namespace mcnsfv
