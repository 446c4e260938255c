#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfuse/data.hpp"

namespace mfuse {

enum class FamilyId {
    linear,
    glm_logistic,
    glm_poisson,
    wcls_cate,
    log_relative_risk,
    surrogate_stack,
    /// Linear model on (x, z̃) whose x-block equation ignores z̃, i.e. the
    /// partialled-out form used when z̃ has been residualized on x.
    linear_orthogonal,
};

std::string to_string(FamilyId id);
FamilyId family_from_string(const std::string& s);

enum class Outcome { primary, secondary };

/// Index split of a treatment-effect family's parameters into the nuisance
/// block α (first `nuisance_dim` entries) and the effect block γ.
struct CatePartition {
    Eigen::Index nuisance_dim = 0;
    Eigen::Index effect_dim = 0;

    std::vector<Eigen::Index> effect_indices() const;
};

/// A per-observation estimating function together with the features it is
/// built from.
///
///  - linear / glm_*:      design = H
///  - wcls_cate, log_relative_risk: design = control features g, effect = f
///  - surrogate_stack:     design = H shared by the (y, y2) pair
///  - linear_orthogonal:   design = x-block, effect = residualized z-block
struct EquationFamily {
    FamilyId id = FamilyId::linear;
    FeatureMap design;
    FeatureMap effect;
    Outcome outcome = Outcome::primary;
    /// wcls/lrr: use Dataset::propensity_x instead of Dataset::propensity.
    bool marginal_propensity = false;

    static EquationFamily linear(FeatureMap design, Outcome outcome = Outcome::primary);
    static EquationFamily logistic(FeatureMap design, Outcome outcome = Outcome::primary);
    static EquationFamily poisson(FeatureMap design, Outcome outcome = Outcome::primary);
    static EquationFamily wcls(FeatureMap control, FeatureMap effect, bool marginal_propensity);
    static EquationFamily log_relative_risk(FeatureMap control, FeatureMap effect,
                                            bool marginal_propensity);
    static EquationFamily surrogate_stack(FeatureMap design);
    static EquationFamily linear_orthogonal(FeatureMap x_block, FeatureMap z_block);

    Eigen::Index param_dim() const;
    bool uses_z() const { return design.uses_z() || effect.uses_z(); }
    bool linear_in_params() const;
    CatePartition cate_partition() const;
    void validate(const Dataset& data) const;
};

/// Per-observation Jacobians stored in factored form:
/// Jᵢ = Σ_k left[k].row(i)ᵀ · right[k].row(i). Every family here has
/// Jacobians of rank at most two, so the full n×p×p stack is never formed.
struct JacobianStack {
    std::vector<MatrixXd> left;
    std::vector<MatrixXd> right;

    Eigen::Index n() const { return left.empty() ? 0 : left.front().rows(); }
    MatrixXd at(Eigen::Index i) const;
    /// Σᵢ wᵢ Jᵢ / Σᵢ wᵢ.
    MatrixXd weighted_mean(const VectorXd& w) const;
};

struct EquationEval {
    MatrixXd scores;  // n × param_dim
    JacobianStack jacobian;
    std::vector<Eigen::Index> clamped_rows;
};

/// Linear predictors are clamped to ±kEtaClamp before exponentiation.
inline constexpr double kEtaClamp = 30.0;

EquationEval eval_equation(const EquationFamily& fam, const Dataset& data, const VectorXd& params);

/// Σᵢ wᵢ ψᵢ / Σᵢ wᵢ.
VectorXd weighted_mean_score(const MatrixXd& scores, const VectorXd& w);

/// Design used for predictive losses. For treatment-effect families the full
/// design is [g, f]; `effect_only` returns f alone.
MatrixXd predict_design(const EquationFamily& fam, const Dataset& data, bool effect_only = false);

/// Replaces z by its residual on the x-features (weighted least squares).
Dataset orthogonalize_z(const Dataset& data, const FeatureMap& x_features);

/// Plug-in logistic propensity P(A = 1 | features), clipped to [1e-6, 1 - 1e-6].
VectorXd fit_propensity(const Dataset& data, const FeatureMap& features);

}  // namespace mfuse
