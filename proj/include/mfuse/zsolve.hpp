#pragma once

#include <optional>

#include <Eigen/Dense>

#include "mfuse/data.hpp"
#include "mfuse/equations.hpp"

namespace mfuse {

struct SolveOptions {
    /// Starting point; defaults to the closed form for families linear in
    /// their parameters and to zero otherwise.
    std::optional<VectorXd> init;
    double tol = 1e-9;
    int max_iter = 100;
};

struct SolveReport {
    VectorXd params;
    int iterations = 0;
    double final_norm = 0.0;  // max-abs weighted mean score
    bool converged = false;
    bool ridge_used = false;
};

/// Damped Newton on Σᵢ ωᵢ ψᵢ(params) = 0. The step is halved (at most 30
/// times) whenever the max-abs weighted mean score fails to decrease.
SolveReport solve(const EquationFamily& fam, const Dataset& data, const SolveOptions& opts = {});

}  // namespace mfuse
