#include "mfuse/shrinkage.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "mfuse/errors.hpp"

namespace mfuse {

namespace {

struct JParts {
    SymMatrix j_est;
    SymMatrix s;  // (Σʰ_θ)^{-1/2}
    double trace = 0.0;
    double norm = 0.0;
};

JParts j_parts(const ConditionalResult& cond, const SymMatrix& a) {
    if (a.dim() != cond.gamma_internal.size())
        throw SchemaError(fmt::format("weight matrix is {}x{}, gamma has {} entries", a.dim(),
                                      a.dim(), cond.gamma_internal.size()));
    JParts p;
    p.s = inv_sqrt(cond.sigma_h_theta);
    const MatrixXd left = p.s.matrix() * cond.sigma_h_cross.transpose();  // p' × q
    p.j_est = SymMatrix(left * a.matrix() * left.transpose());
    p.trace = p.j_est.matrix().trace();
    p.norm = spectral_norm(p.j_est);
    return p;
}

double d_ratio(double trace, double norm) { return norm > 0.0 ? trace / norm : 0.0; }

}  // namespace

WeightMatrixSpec WeightMatrixSpec::from_string(const std::string& loss, std::vector<Eigen::Index> subset) {
    WeightMatrixSpec s;
    if (loss == "identity") s.kind = Kind::identity;
    else if (loss == "inv_cov" || loss == "inverse_covariance") s.kind = Kind::inverse_covariance;
    else if (loss == "pmse" || loss == "predictive") s.kind = Kind::predictive;
    else if (loss == "pmse_subset" || loss == "predictive_subset") s.kind = Kind::predictive_subset;
    else throw ConfigError(fmt::format("unknown loss '{}'", loss));
    s.subset = std::move(subset);
    if (s.kind == Kind::predictive_subset && s.subset.empty())
        throw ConfigError("pmse_subset loss needs a column list");
    return s;
}

std::string to_string(WeightMatrixSpec::Kind k) {
    switch (k) {
        case WeightMatrixSpec::Kind::identity: return "identity";
        case WeightMatrixSpec::Kind::inverse_covariance: return "inv_cov";
        case WeightMatrixSpec::Kind::predictive: return "pmse";
        case WeightMatrixSpec::Kind::predictive_subset: return "pmse_subset";
    }
    return "unknown";
}

std::string to_string(ShrinkageFallback f) {
    switch (f) {
        case ShrinkageFallback::none: return "none";
        case ShrinkageFallback::d_le_2: return "d_le_2";
        case ShrinkageFallback::zero_denominator: return "zero_denominator";
    }
    return "unknown";
}

SymMatrix build_A(const WeightMatrixSpec& spec, const JointFit& joint, const Dataset& data) {
    const FittedModel& g = joint.gamma_block;
    const auto q = g.params.size();
    switch (spec.kind) {
        case WeightMatrixSpec::Kind::identity: return SymMatrix::identity(q);
        case WeightMatrixSpec::Kind::inverse_covariance:
            return SymMatrix(reg_solve(g.sigma_per_obs, MatrixXd::Identity(q, q)).x);
        case WeightMatrixSpec::Kind::predictive:
        case WeightMatrixSpec::Kind::predictive_subset: break;
    }
    const MatrixXd h = predict_design(g.family, data);
    const VectorXd& w = data.obs_weights();
    const MatrixXd gram = h.transpose() * (w.asDiagonal() * h) / w.sum();
    MatrixXd full = MatrixXd::Zero(q, q);
    if (g.family.id == FamilyId::surrogate_stack) {
        // Loss on the primary endpoint's predictions only.
        full.topLeftCorner(gram.rows(), gram.cols()) = gram;
    } else {
        full = gram;
    }
    if (spec.kind == WeightMatrixSpec::Kind::predictive) return SymMatrix(full);

    MatrixXd sub = MatrixXd::Zero(q, q);
    for (auto i : spec.subset)
        if (i < 0 || i >= q) throw SchemaError(fmt::format("loss subset index {} outside 0..{}", i, q - 1));
    for (auto i : spec.subset)
        for (auto j : spec.subset) sub(i, j) = full(i, j);
    return SymMatrix(sub);
}

double cond_weight(double tau, double denominator, ShrinkageFallback* fallback) {
    ShrinkageFallback f = ShrinkageFallback::none;
    double w = 0.0;
    if (!(denominator > 0.0)) {
        f = ShrinkageFallback::zero_denominator;
    } else if (!(tau > 0.0)) {
        f = ShrinkageFallback::d_le_2;
    } else {
        w = 1.0 - std::max(0.0, 1.0 - tau / denominator);
    }
    if (fallback) *fallback = f;
    return w;
}

ShrinkageResult james_stein(const ConditionalResult& cond, const JointFit& joint, const SymMatrix& a) {
    if (joint.gamma_block.params.size() != cond.gamma_internal.size())
        throw SchemaError("james_stein: joint fit and conditional result disagree on gamma");
    const JParts jp = j_parts(cond, a);
    const double n = static_cast<double>(cond.n_internal);

    ShrinkageResult r;
    r.j_matrix = SymMatrix(n * jp.j_est.matrix());
    r.trace_j = n * jp.trace;
    r.norm_j = n * jp.norm;
    r.d_ratio = d_ratio(jp.trace, jp.norm);
    r.tau_star = r.trace_j - 2.0 * r.norm_j;
    const VectorXd delta = cond.gamma_cond - cond.gamma_internal;
    r.denominator = n * delta.dot(a.matrix() * delta);
    r.weight = cond_weight(r.tau_star, r.denominator, &r.fallback);
    r.gamma_js = r.weight * cond.gamma_cond + (1.0 - r.weight) * cond.gamma_internal;
    return r;
}

double weight_from_theta_diff(const ConditionalResult& cond, const SymMatrix& a) {
    if (!cond.identity_transform)
        throw SchemaError("weight_from_theta_diff holds under the identity transformation only");
    const JParts jp = j_parts(cond, a);
    const double n = static_cast<double>(cond.n_internal);
    const VectorXd u = jp.s.matrix() * (cond.theta_external - cond.theta_internal);
    const double tau = n * (jp.trace - 2.0 * jp.norm);
    const double denom = n * u.dot(jp.j_est.matrix() * u);
    return cond_weight(tau, denom);
}

FrozenShrinkage FrozenShrinkage::from(const ConditionalResult& cond, const SymMatrix& a) {
    const JParts jp = j_parts(cond, a);
    FrozenShrinkage f;
    f.j_estimate = jp.j_est;
    f.sigma_inv_sqrt = jp.s;
    f.tau_estimate = jp.trace - 2.0 * jp.norm;
    f.applicable = f.tau_estimate > 0.0;
    return f;
}

double FrozenShrinkage::weight(const VectorXd& h_external_minus_internal) const {
    const VectorXd u = sigma_inv_sqrt.matrix() * h_external_minus_internal;
    return cond_weight(tau_estimate, u.dot(j_estimate.matrix() * u));
}

}  // namespace mfuse
