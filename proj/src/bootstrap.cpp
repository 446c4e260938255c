#include "mfuse/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "mfuse/errors.hpp"
#include "mfuse/parallel.hpp"
#include "mfuse/sandwich.hpp"

namespace mfuse {

namespace {

constexpr double kMaxFailedShare = 0.05;

void fill_interval(EstimatorDraws& e, const std::vector<bool>& failed, double level) {
    const auto q = e.draws.cols();
    e.ci_lower.resize(q);
    e.ci_upper.resize(q);
    for (Eigen::Index j = 0; j < q; ++j) {
        std::vector<double> v;
        for (Eigen::Index k = 0; k < e.draws.rows(); ++k)
            if (!failed[static_cast<std::size_t>(k)]) v.push_back(e.draws(k, j));
        std::sort(v.begin(), v.end());
        e.ci_lower(j) = quantile_sorted(v, (1.0 - level) / 2.0);
        e.ci_upper(j) = quantile_sorted(v, (1.0 + level) / 2.0);
    }
}

}  // namespace

void BootstrapConfig::validate() const {
    if (replicates < 1) throw ConfigError("bootstrap replicates must be at least 1");
    if (!(ci_level > 0.0 && ci_level < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
    if (threads < 1) throw ConfigError("bootstrap threads must be at least 1");
}

VectorXd exp_multipliers(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::exponential_distribution<double> law(1.0);
    VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w(i) = law(gen);
    return w;
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapOutput bootstrap_fuse(const Dataset& data, const ExternalSummary& ext,
                               const EquationFamily& psi, const EquationFamily& phi,
                               const Transformation& t, const WeightMatrixSpec& a_spec,
                               const BootstrapConfig& cfg) {
    cfg.validate();
    const Dataset& base_data = data;
    const JointFit base = fit_joint(psi, phi, base_data);
    const ConditionalResult base_cond = conditional_estimate(base, ext, t);
    const SymMatrix a = build_A(a_spec, base, base_data);
    const ShrinkageResult base_js = james_stein(base_cond, base, a);
    const FrozenShrinkage frozen = FrozenShrinkage::from(base_cond, a);
    const VectorXd h_external = t.apply(ext.theta_hat);

    const auto reps = static_cast<Eigen::Index>(cfg.replicates);
    const auto q = base.gamma_block.params.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    BootstrapOutput out;
    out.internal.draws = MatrixXd::Constant(reps, q, nan);
    out.conditional.draws = MatrixXd::Constant(reps, q, nan);
    out.js.draws = MatrixXd::Constant(reps, q, nan);
    out.weights_js = VectorXd::Constant(reps, nan);
    out.failed.assign(static_cast<std::size_t>(reps), false);
    out.base_weight = base_js.weight;

    SolveOptions psi_opts, phi_opts;
    if (!psi.linear_in_params()) psi_opts.init = base.theta_block.params;
    if (!phi.linear_in_params()) phi_opts.init = base.gamma_block.params;

    std::vector<char> failed(static_cast<std::size_t>(reps), 0);
    parallel_for(static_cast<std::size_t>(reps), cfg.threads, [&](std::size_t k) {
        const auto row = static_cast<Eigen::Index>(k);
        VectorXd w = data.obs_weights();
        if (!cfg.unit_multipliers)
            w.array() *= exp_multipliers(data.n(), cfg.base_seed + static_cast<std::uint64_t>(k)).array();
        try {
            const Dataset weighted = base_data.with_weights(std::move(w));
            const JointFit joint = joint_sandwich(fit_model(psi, weighted, psi_opts),
                                                  fit_model(phi, weighted, phi_opts), weighted);
            const ConditionalResult cond = conditional_estimate(joint, ext, t);
            const double wk = frozen.weight(h_external - t.apply(joint.theta_block.params));
            out.internal.draws.row(row) = cond.gamma_internal.transpose();
            out.conditional.draws.row(row) = cond.gamma_cond.transpose();
            out.js.draws.row(row) =
                (wk * cond.gamma_cond + (1.0 - wk) * cond.gamma_internal).transpose();
            out.weights_js(row) = wk;
        } catch (const Error&) {
            failed[k] = 1;
        }
    });

    for (std::size_t k = 0; k < failed.size(); ++k) {
        out.failed[k] = failed[k] != 0;
        out.n_failed += failed[k];
    }
    if (out.n_failed > kMaxFailedShare * static_cast<double>(reps))
        throw BootstrapDegenerateError(
            fmt::format("{} of {} bootstrap replicates failed", out.n_failed, reps));

    out.internal.point = base_cond.gamma_internal;
    out.conditional.point = base_cond.gamma_cond;
    out.js.point = base_js.gamma_js;
    for (auto* e : {&out.internal, &out.conditional, &out.js}) fill_interval(*e, out.failed, cfg.ci_level);
    return out;
}

}  // namespace mfuse
