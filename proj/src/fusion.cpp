#include "mfuse/fusion.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mfuse/errors.hpp"

namespace mfuse {

Transformation ExternalSummary::transformation() const {
    return Transformation::from_declaration(transform_kind, theta_hat.size(), transform_indices);
}

void ExternalSummary::validate() const {
    if (theta_hat.size() < 1) throw SchemaError("external summary has an empty theta");
    if (cov_theta_hat.dim() != theta_hat.size())
        throw SchemaError(fmt::format("external summary: theta has {} entries but cov is {}x{}",
                                      theta_hat.size(), cov_theta_hat.dim(), cov_theta_hat.dim()));
    if (n_external < 1) throw SchemaError("external summary: n must be at least 1");
    if (!theta_hat.allFinite() || !cov_theta_hat.matrix().allFinite())
        throw SchemaError("external summary has non-finite values");
    const double scale = std::max(1.0, spectral_norm(cov_theta_hat));
    if (min_eigenvalue(cov_theta_hat.matrix()) < -1e-10 * scale)
        throw SchemaError("external summary covariance is not positive semi-definite");
}

ExternalSummary summarize_external(const FittedModel& fit, const Transformation& t) {
    ExternalSummary s;
    s.theta_hat = fit.params;
    s.cov_theta_hat = fit.sigma_estimate;
    s.n_external = fit.n;
    s.family = fit.family.id;
    s.transform_kind = t.kind_name();
    s.transform_indices = t.indices();
    return s;
}

ConditionalResult conditional_estimate(const JointFit& joint, const ExternalSummary& ext,
                                       const Transformation& t) {
    ext.validate();
    const FittedModel& th = joint.theta_block;
    const FittedModel& ga = joint.gamma_block;
    if (th.family.id != ext.family)
        throw SchemaError(fmt::format("external summary family '{}' does not match internal ψ family '{}'",
                                      to_string(ext.family), to_string(th.family.id)));
    if (ext.theta_hat.size() != th.params.size())
        throw SchemaError(fmt::format("external theta has {} entries, internal ψ has {}",
                                      ext.theta_hat.size(), th.params.size()));
    if (!t.same_declaration(ext.transformation()))
        throw SchemaError(fmt::format("transformation '{}' differs from the external declaration '{}'",
                                      t.kind_name(), ext.transform_kind));

    const MatrixXd grad_e = t.gradient(ext.theta_hat);
    const MatrixXd grad_i = t.gradient(th.params);

    ConditionalResult r;
    r.gamma_internal = ga.params;
    r.theta_internal = th.params;
    r.theta_external = ext.theta_hat;
    r.identity_transform = t.kind() == Transformation::Kind::identity;
    r.n_internal = th.n;
    r.cov_internal = ga.sigma_estimate;
    r.sigma_h_theta = SymMatrix(delta_method(grad_e, ext.cov_theta_hat.matrix()) +
                                delta_method(grad_i, th.sigma_estimate.matrix()));
    r.sigma_h_cross = joint.cross_sigma_estimate().transpose() * grad_i;

    const RegSolve kt = reg_solve(r.sigma_h_theta, r.sigma_h_cross.transpose());
    r.correction_gain = kt.x.transpose();
    r.efficiency_certified = !(kt.ridge_fallback || th.ridge_used || ga.ridge_used);

    r.h_diff = t.apply(th.params) - t.apply(ext.theta_hat);
    r.gamma_cond = r.gamma_internal - r.correction_gain * r.h_diff;
    r.cov_cond = SymMatrix(r.cov_internal.matrix() - r.correction_gain * r.sigma_h_cross.transpose());
    return r;
}

VectorXd secondary_endpoint_closed_form(double rho, double sigma1, double sigma2,
                                        Eigen::Index n_internal, Eigen::Index n_external,
                                        const VectorXd& theta_diff, const VectorXd& gamma_internal) {
    if (!(std::abs(rho) <= 1.0)) throw NumericError("secondary endpoint: |rho| must be at most 1");
    if (!(sigma1 > 0 && sigma2 > 0)) throw NumericError("secondary endpoint: sigmas must be positive");
    if (n_internal < 1 || n_external < 1) throw NumericError("secondary endpoint: sample sizes must be positive");
    if (theta_diff.size() != gamma_internal.size())
        throw SchemaError("secondary endpoint: theta_diff and gamma_internal differ in length");
    const double share = static_cast<double>(n_external) /
                         static_cast<double>(n_internal + n_external);
    return gamma_internal + share * rho * (sigma1 / sigma2) * theta_diff;
}

}  // namespace mfuse
