#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfuse/equations.hpp"
#include "mfuse/numerics.hpp"
#include "mfuse/sandwich.hpp"
#include "mfuse/transform.hpp"

namespace mfuse {

/// What an analyst receives from the external study: the estimate, the
/// covariance of that estimate (already on the 1/n_E scale), and the
/// declarations needed to reproduce its estimating equations.
struct ExternalSummary {
    VectorXd theta_hat;
    SymMatrix cov_theta_hat;
    Eigen::Index n_external = 0;
    FamilyId family = FamilyId::linear;
    std::string transform_kind = "identity";
    std::vector<Eigen::Index> transform_indices;

    Transformation transformation() const;
    void validate() const;
};

ExternalSummary summarize_external(const FittedModel& fit, const Transformation& t);

struct ConditionalResult {
    VectorXd gamma_internal;
    VectorXd gamma_cond;
    MatrixXd correction_gain;  // K = Σʰ_{γ,θ} (Σʰ_θ)⁻¹, q × p'
    VectorXd h_diff;           // h(θ̂_I) − h(θ̂_E)
    SymMatrix cov_internal;    // cov(γ̂_I), estimate scale
    SymMatrix cov_cond;        // estimate scale
    SymMatrix sigma_h_theta;   // Σʰ_θ, p' × p'
    MatrixXd sigma_h_cross;    // Σʰ_{γ,θ}, q × p'
    VectorXd theta_internal;
    VectorXd theta_external;
    bool identity_transform = false;
    Eigen::Index n_internal = 0;
    /// False when any factorization needed the ridge fallback; the
    /// efficiency ordering is then not guaranteed.
    bool efficiency_certified = true;
};

/// γ̂_cond = γ̂_I − Σʰ_{γ,θ}(Σʰ_θ)⁻¹(h(θ̂_I) − h(θ̂_E)), all blocks on the
/// estimate scale. ∇h is evaluated at θ̂_E for the external block and at θ̂_I
/// for the internal block.
ConditionalResult conditional_estimate(const JointFit& joint, const ExternalSummary& ext,
                                       const Transformation& t);

/// Closed form for the bivariate-normal secondary endpoint model with a
/// shared design: γ̂_I + n_E/(n_I + n_E) · ρ · σ₁/σ₂ · (θ̂_E − θ̂_I).
/// `theta_diff` is θ̂_E − θ̂_I.
VectorXd secondary_endpoint_closed_form(double rho, double sigma1, double sigma2,
                                        Eigen::Index n_internal, Eigen::Index n_external,
                                        const VectorXd& theta_diff, const VectorXd& gamma_internal);

}  // namespace mfuse
