#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mfuse {

/// Base of every error raised by the library. `name()` is the stable
/// identifier the CLI prints on standard error.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& what)
        : std::runtime_error(name + ": " + what), name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

#define MFUSE_DEFINE_ERROR(Type)                                         \
    class Type : public Error {                                          \
    public:                                                              \
        explicit Type(const std::string& what) : Error(#Type, what) {}   \
    };

MFUSE_DEFINE_ERROR(NumericError)
MFUSE_DEFINE_ERROR(SingularMatrixError)
MFUSE_DEFINE_ERROR(IllConditionedError)
MFUSE_DEFINE_ERROR(SchemaError)
MFUSE_DEFINE_ERROR(DegenerateTransformError)
MFUSE_DEFINE_ERROR(BootstrapDegenerateError)
MFUSE_DEFINE_ERROR(ScenarioDegenerateError)
MFUSE_DEFINE_ERROR(InsufficientDataError)
MFUSE_DEFINE_ERROR(ConfigError)

#undef MFUSE_DEFINE_ERROR

/// Raised when the root-finder exhausts its iteration budget or the iterate
/// runs off to infinity. Carries the best iterate seen.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, Eigen::VectorXd best, double best_norm)
        : Error("NonConvergenceError", what), best_(std::move(best)), best_norm_(best_norm) {}

    const Eigen::VectorXd& best_iterate() const noexcept { return best_; }
    double best_norm() const noexcept { return best_norm_; }

private:
    Eigen::VectorXd best_;
    double best_norm_;
};

}  // namespace mfuse
