#pragma once

#include <stdexcept>
#include <string>

namespace geoctrl {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error reports.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// M(q) is not symmetric positive definite or its condition number exceeds
/// the 1e12 guard.
class SingularInertiaError : public Error {
public:
    explicit SingularInertiaError(const std::string& what) : Error("singular-inertia", what) {}
};

/// Integration produced a non-finite state.
class NonFiniteStateError : public Error {
public:
    NonFiniteStateError(double time, const std::string& what)
        : Error("non-finite-state", what), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error("precondition", what) {}
};

/// The input vectors {Y_a(q)} lost rank at the point being evaluated.
class RankDeficientError : public Error {
public:
    explicit RankDeficientError(const std::string& what) : Error("rank-deficient", what) {}
};

/// <Y_a:Y_a>(q) is not in span{Y_b(q)}: oscillatory synthesis cannot cancel it.
class AssumptionViolationError : public Error {
public:
    AssumptionViolationError(double residual, const std::string& what)
        : Error("assumption-violation", what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// A kinematic plan segment failed input reconstruction.
class ResidualViolationError : public Error {
public:
    ResidualViolationError(std::size_t segment, std::size_t sample, double residual,
                           const std::string& what)
        : Error("residual-violation", what), segment_(segment), sample_(sample),
          residual_(residual) {}

    std::size_t segment() const noexcept { return segment_; }
    std::size_t sample() const noexcept { return sample_; }
    double residual() const noexcept { return residual_; }

private:
    std::size_t segment_;
    std::size_t sample_;
    double residual_;
};

class UnknownModelError : public Error {
public:
    explicit UnknownModelError(const std::string& what) : Error("unknown-model", what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

}  // namespace geoctrl
