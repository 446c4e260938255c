#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mfuse/data.hpp"
#include "mfuse/equations.hpp"
#include "mfuse/fusion.hpp"
#include "mfuse/shrinkage.hpp"
#include "mfuse/transform.hpp"

namespace mfuse {

struct BootstrapConfig {
    int replicates = 200;
    std::uint64_t base_seed = 1;
    double ci_level = 0.90;
    int threads = 1;
    /// Test hook: every multiplier is 1.
    bool unit_multipliers = false;

    void validate() const;
};

struct EstimatorDraws {
    MatrixXd draws;  // B × q; rows of failed replicates hold NaN
    VectorXd point;  // estimate on the original data
    VectorXd ci_lower;
    VectorXd ci_upper;
};

/// Generalized bootstrap with i.i.d. Exp(1) observation multipliers.
/// Replicate k draws its multipliers from a stream seeded with base_seed + k.
struct BootstrapOutput {
    EstimatorDraws internal;
    EstimatorDraws conditional;
    EstimatorDraws js;
    VectorXd weights_js;          // per replicate, NaN when failed
    std::vector<bool> failed;
    int n_failed = 0;
    double base_weight = 0.0;
};

/// Unit-mean exponential multipliers for one replicate.
VectorXd exp_multipliers(Eigen::Index n, std::uint64_t seed);

BootstrapOutput bootstrap_fuse(const Dataset& data, const ExternalSummary& ext,
                               const EquationFamily& psi, const EquationFamily& phi,
                               const Transformation& t, const WeightMatrixSpec& a_spec,
                               const BootstrapConfig& cfg);

/// Type-7 (linear interpolation) sample quantile; `sorted` ascending.
double quantile_sorted(const std::vector<double>& sorted, double prob);

}  // namespace mfuse
