#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfuse/data.hpp"
#include "mfuse/fusion.hpp"
#include "mfuse/numerics.hpp"
#include "mfuse/sandwich.hpp"

namespace mfuse {

/// Loss weighting (γ̂ − γ)ᵀ A (γ̂ − γ).
struct WeightMatrixSpec {
    enum class Kind { identity, inverse_covariance, predictive, predictive_subset };
    Kind kind = Kind::predictive;
    std::vector<Eigen::Index> subset;

    static WeightMatrixSpec from_string(const std::string& loss, std::vector<Eigen::Index> subset = {});
};

std::string to_string(WeightMatrixSpec::Kind k);

enum class ShrinkageFallback { none, d_le_2, zero_denominator };

std::string to_string(ShrinkageFallback f);

/// James-Stein combination of the internal and conditional estimates.
///
/// `weight` is the weight on γ̂_cond: γ̂_JS = w·γ̂_cond + (1 − w)·γ̂_I with
/// w = 1 − (1 − τ̂*/D)₊, so the estimate moves to γ̂_I as the discrepancy D
/// grows and to γ̂_cond when D is within the noise level τ̂*.
///
/// J, τ̂* and D are reported on the per-observation scale (estimate-scale
/// quantities multiplied by n_I); the weight only depends on τ̂*/D.
struct ShrinkageResult {
    VectorXd gamma_js;
    double weight = 0.0;
    double tau_star = 0.0;
    SymMatrix j_matrix;
    double trace_j = 0.0;
    double norm_j = 0.0;
    double d_ratio = 0.0;
    double denominator = 0.0;
    ShrinkageFallback fallback = ShrinkageFallback::none;
};

SymMatrix build_A(const WeightMatrixSpec& spec, const JointFit& joint, const Dataset& data);

ShrinkageResult james_stein(const ConditionalResult& cond, const JointFit& joint, const SymMatrix& a);

/// The same weight through the θ-scale form: uses the standardized
/// difference Σ̂_θ^{-1/2}(θ̂_E − θ̂_I) and Ĵ. Identity transformation only.
double weight_from_theta_diff(const ConditionalResult& cond, const SymMatrix& a);

/// Ĵ and Σ̂ʰ_θ^{-1/2} frozen at one fit, used to weight bootstrap replicates.
struct FrozenShrinkage {
    SymMatrix j_estimate;       // estimate-scale Ĵ
    SymMatrix sigma_inv_sqrt;   // (Σ̂ʰ_θ)^{-1/2}
    double tau_estimate = 0.0;  // tr(Ĵ) − 2‖Ĵ‖ on the estimate scale
    bool applicable = false;    // d > 2

    static FrozenShrinkage from(const ConditionalResult& cond, const SymMatrix& a);
    /// Weight on the conditional estimate for the transformed difference
    /// h(θ̂_E) − h(θ̂_I).
    double weight(const VectorXd& h_external_minus_internal) const;
};

/// w = 1 − (1 − τ/D)₊ with the fallbacks above.
double cond_weight(double tau, double denominator, ShrinkageFallback* fallback = nullptr);

}  // namespace mfuse
