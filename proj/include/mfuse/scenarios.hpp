#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfuse/data.hpp"
#include "mfuse/equations.hpp"
#include "mfuse/fusion.hpp"
#include "mfuse/shrinkage.hpp"
#include "mfuse/transform.hpp"

namespace mfuse {

enum class ScenarioKind { linear, logistic, cate, surrogate, missing_outcome, missing_covariate };

std::string to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(const std::string& s);

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::linear;
    Eigen::Index n_internal = 200;
    Eigen::Index n_external = 20000;

    double beta_c = 0.5;
    double beta_x = 0.5;
    double beta_z = 0.2;
    double beta_xz = 0.2;
    /// Mean of Z2 is z2_log_coef · log X1.
    double z2_log_coef = 0.2;
    double noise_sd = 2.0;

    /// Treatment-effect coefficients: intercept, X1·A, X2·A, Z1·A, X2·Z2·A.
    std::vector<double> tau = {0.5, 0.2, 0.2, 0.2, 0.2};
    /// Assignment model logit P(A = 1) = a0 + a1·X1 + a2·Z1.
    std::vector<double> treat_alpha = {0.0, 0.3, 0.3};

    std::vector<double> offsets = default_offsets();
    /// Surrogate correlations; one report block per value.
    std::vector<double> rho_grid = {0.7, 0.8, 0.9, 1.0};
    double rho = 0.9;
    double sigma1 = 2.0;
    double sigma2 = 2.0;
    /// Missing-data kinds: share of rows whose outcome (or Z) is unobserved.
    double missing_rate = 0.5;

    int mc_replicates = 200;
    std::uint64_t base_seed = 20240101;
    int threads = 1;
    Eigen::Index eval_n = 10000;
    Eigen::Index truth_n = 1000000;

    std::optional<WeightMatrixSpec> loss;  // defaults per kind
    bool coverage = false;
    int bootstrap_replicates = 200;
    double ci_level = 0.90;

    static std::vector<double> default_offsets();
    void validate() const;
};

/// One draw. For the missing-data kinds `internal` holds every row and
/// `observed` marks rows with the outcome (or Z) present.
struct GeneratedData {
    Dataset internal;
    std::optional<Dataset> external;
    std::vector<bool> observed;
};

GeneratedData generate(const ScenarioSpec& spec, double offset, std::uint64_t seed);

/// `n` rows from the internal law (no offset); used for evaluation and truth.
Dataset generate_internal_law(const ScenarioSpec& spec, Eigen::Index n, std::uint64_t seed);

/// P(A = 1 | X1) = E over Z1 ~ N(0,1) of expit(a0 + a1·X1 + a2·Z1).
double marginal_propensity(double a0, double a1, double a2, double x1);

/// Gauss-Hermite rule for E f(Z), Z ~ N(0, 1): nodes and weights summing to 1.
std::pair<VectorXd, VectorXd> gauss_hermite_normal(int points);

/// The estimating equations, transformation and loss used by a scenario.
struct ScenarioModels {
    EquationFamily psi;
    EquationFamily phi;
    Transformation transform;
    WeightMatrixSpec loss;
    /// φ coordinates scored by the predictive metric (all of φ, or the
    /// effect block for CATE).
    std::vector<Eigen::Index> eval_coords;
    /// φ coordinates that also appear in the external model.
    std::vector<bool> external_param;
};

ScenarioModels scenario_models(const ScenarioSpec& spec);

/// Population target of φ under the internal law.
VectorXd scenario_truth(const ScenarioSpec& spec, const ScenarioModels& models);

inline const std::vector<std::string> kEstimatorNames = {"internal", "conditional", "js"};

struct ReplicateRow {
    std::string scenario;
    std::size_t offset_index = 0;
    double offset = 0.0;
    int replicate = 0;
    bool failed = false;
    double pmse[3] = {0, 0, 0};
    double rel_pmse[3] = {0, 0, 0};
    double js_weight = 0.0;
    /// γ̂_cond − γ̂_I.
    VectorXd correction;
    /// covered[e][j]: percentile interval of estimator e contains γ*_j.
    std::vector<std::vector<bool>> covered;
};

struct SummaryRow {
    std::string scenario;
    double offset = 0.0;
    std::string estimator;
    double rel_pmse_mean = 0.0;
    double rel_pmse_se = 0.0;
    double coverage_all = 0.0;  // NaN without coverage
    double coverage_external_params = 0.0;
    double coverage_other_params = 0.0;
    double mean_js_weight = 0.0;
    int n_failed = 0;
};

struct ScenarioReport {
    std::vector<SummaryRow> rows;
    std::vector<ReplicateRow> replicates;
    VectorXd truth;
};

ScenarioReport run_scenario(const ScenarioSpec& spec);

/// Everything conditional_estimate needs, assembled from one dataset.
struct FusionInputs {
    Dataset internal;
    ExternalSummary external;
    EquationFamily psi;
    EquationFamily phi;
    Transformation transform;
};

/// Rows with the outcome missing act as the external study for a secondary
/// endpoint Ỹ. With `predictive_model` given, Ỹ is its linear prediction from
/// [x, z] (or x when its length equals the x width); otherwise Ỹ is the
/// dataset's y2 column. ψ regresses Ỹ on `psi_design`, φ regresses y on
/// `phi_design`.
FusionInputs missing_outcome_workflow(const Dataset& data, const std::vector<bool>& outcome_observed,
                                      const std::optional<VectorXd>& predictive_model,
                                      const FeatureMap& psi_design, const FeatureMap& phi_design);

/// Rows with Z missing act as the external study for ψ (y on `psi_design`);
/// complete cases fit both ψ and φ.
FusionInputs missing_covariate_workflow(const Dataset& data, const std::vector<bool>& z_observed,
                                        const FeatureMap& psi_design, const FeatureMap& phi_design);

}  // namespace mfuse
