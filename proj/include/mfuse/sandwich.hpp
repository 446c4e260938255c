#pragma once

#include <Eigen/Dense>

#include "mfuse/data.hpp"
#include "mfuse/equations.hpp"
#include "mfuse/numerics.hpp"
#include "mfuse/zsolve.hpp"

namespace mfuse {

/// A solved estimating equation with its empirical sandwich covariance.
///
/// Averages are weighted by the observation multipliers and normalized by
/// their total, so rescaling every weight leaves the covariance unchanged.
struct FittedModel {
    EquationFamily family;
    VectorXd params;
    MatrixXd q_hat;           // mean Jacobian (not symmetric in general)
    MatrixXd q_inv;
    SymMatrix w_hat;          // mean score outer product
    SymMatrix sigma_per_obs;  // Q⁻¹ W Q⁻ᵀ
    SymMatrix sigma_estimate; // sigma_per_obs / n
    Eigen::Index n = 0;
    bool ridge_used = false;
};

/// Stacked internal fit of (ψ, φ) on the same rows.
struct JointFit {
    FittedModel theta_block;
    FittedModel gamma_block;
    MatrixXd cross_sigma;  // per-observation Σ_{θ,γ}, p × q
    SymMatrix joint_sigma_estimate;

    MatrixXd cross_sigma_estimate() const {
        return cross_sigma / static_cast<double>(theta_block.n);
    }
};

FittedModel sandwich_fit(const EquationFamily& fam, const Dataset& data, const SolveReport& solved);

/// Solve + sandwich in one call.
FittedModel fit_model(const EquationFamily& fam, const Dataset& data, const SolveOptions& opts = {});

JointFit joint_sandwich(const FittedModel& theta_model, const FittedModel& gamma_model,
                        const Dataset& data);

/// Fits ψ and φ on `data` and stacks them.
JointFit fit_joint(const EquationFamily& psi, const EquationFamily& phi, const Dataset& data);

}  // namespace mfuse
