#include "mfuse/sandwich.hpp"

#include <fmt/format.h>

#include "mfuse/errors.hpp"

namespace mfuse {

namespace {

MatrixXd weighted_outer(const MatrixXd& a, const MatrixXd& b, const VectorXd& w) {
    return a.transpose() * (w.asDiagonal() * b) / w.sum();
}

MatrixXd sandwich_block(const MatrixXd& qa_inv, const MatrixXd& wab, const MatrixXd& qb_inv) {
    return qa_inv * wab * qb_inv.transpose();
}

}  // namespace

FittedModel sandwich_fit(const EquationFamily& fam, const Dataset& data, const SolveReport& solved) {
    if (!solved.converged) throw NumericError("sandwich_fit requires a converged solve");
    const EquationEval e = eval_equation(fam, data, solved.params);
    const VectorXd& w = data.obs_weights();

    FittedModel m;
    m.family = fam;
    m.params = solved.params;
    m.n = data.n();
    m.q_hat = e.jacobian.weighted_mean(w);
    const RegSolve inv = general_solve(m.q_hat, MatrixXd::Identity(m.q_hat.rows(), m.q_hat.cols()));
    m.q_inv = inv.x;
    m.ridge_used = solved.ridge_used || inv.ridge_fallback;
    m.w_hat = SymMatrix(weighted_outer(e.scores, e.scores, w));
    m.sigma_per_obs = SymMatrix(sandwich_block(m.q_inv, m.w_hat.matrix(), m.q_inv));
    m.sigma_estimate = SymMatrix(m.sigma_per_obs.matrix() / static_cast<double>(m.n));
    return m;
}

FittedModel fit_model(const EquationFamily& fam, const Dataset& data, const SolveOptions& opts) {
    return sandwich_fit(fam, data, solve(fam, data, opts));
}

JointFit joint_sandwich(const FittedModel& theta_model, const FittedModel& gamma_model,
                        const Dataset& data) {
    if (theta_model.n != data.n() || gamma_model.n != data.n())
        throw SchemaError(fmt::format("joint_sandwich: models fit on {} and {} rows, dataset has {}",
                                      theta_model.n, gamma_model.n, data.n()));
    const VectorXd& w = data.obs_weights();
    const EquationEval psi = eval_equation(theta_model.family, data, theta_model.params);
    const EquationEval phi = eval_equation(gamma_model.family, data, gamma_model.params);

    JointFit j;
    j.theta_block = theta_model;
    j.gamma_block = gamma_model;
    j.cross_sigma = sandwich_block(theta_model.q_inv, weighted_outer(psi.scores, phi.scores, w),
                                   gamma_model.q_inv);

    const auto p = theta_model.params.size();
    const auto q = gamma_model.params.size();
    MatrixXd joint(p + q, p + q);
    joint.topLeftCorner(p, p) = theta_model.sigma_per_obs.matrix();
    joint.bottomRightCorner(q, q) = gamma_model.sigma_per_obs.matrix();
    joint.topRightCorner(p, q) = j.cross_sigma;
    joint.bottomLeftCorner(q, p) = j.cross_sigma.transpose();
    j.joint_sigma_estimate = SymMatrix(joint / static_cast<double>(data.n()));
    return j;
}

JointFit fit_joint(const EquationFamily& psi, const EquationFamily& phi, const Dataset& data) {
    return joint_sandwich(fit_model(psi, data), fit_model(phi, data), data);
}

}  // namespace mfuse
