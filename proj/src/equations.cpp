#include "mfuse/equations.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mfuse/errors.hpp"
#include "mfuse/numerics.hpp"
#include "mfuse/zsolve.hpp"

namespace mfuse {

namespace {

struct Link {
    VectorXd mean;
    VectorXd deriv;
};

// Clamps eta in place and records the clamped rows.
void clamp_eta(VectorXd& eta, std::vector<Eigen::Index>& clamped) {
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        if (eta(i) > kEtaClamp) {
            eta(i) = kEtaClamp;
            clamped.push_back(i);
        } else if (eta(i) < -kEtaClamp) {
            eta(i) = -kEtaClamp;
            clamped.push_back(i);
        }
    }
}

Link canonical_link(FamilyId id, const VectorXd& eta) {
    Link l;
    if (id == FamilyId::glm_logistic) {
        l.mean = (1.0 + (-eta.array()).exp()).inverse().matrix();
        l.deriv = (l.mean.array() * (1.0 - l.mean.array())).matrix();
    } else {
        l.mean = eta.array().exp().matrix();
        l.deriv = l.mean;
    }
    return l;
}

const VectorXd& outcome_of(const EquationFamily& fam, const Dataset& d) {
    return fam.outcome == Outcome::secondary ? d.y2() : d.y();
}

const VectorXd& propensity_of(const EquationFamily& fam, const Dataset& d) {
    return fam.marginal_propensity ? d.propensity_x() : d.propensity();
}

MatrixXd hstack(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

void check_finite_rows(const MatrixXd& scores, const EquationFamily& fam) {
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        if (!scores.row(i).allFinite())
            throw NumericError(
                fmt::format("{} equation is non-finite at row {}", to_string(fam.id), i));
    }
}

}  // namespace

std::string to_string(FamilyId id) {
    switch (id) {
        case FamilyId::linear: return "linear";
        case FamilyId::glm_logistic: return "glm_logistic";
        case FamilyId::glm_poisson: return "glm_poisson";
        case FamilyId::wcls_cate: return "wcls_cate";
        case FamilyId::log_relative_risk: return "log_relative_risk";
        case FamilyId::surrogate_stack: return "surrogate_stack";
        case FamilyId::linear_orthogonal: return "linear_orthogonal";
    }
    return "unknown";
}

FamilyId family_from_string(const std::string& s) {
    for (auto id : {FamilyId::linear, FamilyId::glm_logistic, FamilyId::glm_poisson,
                    FamilyId::wcls_cate, FamilyId::log_relative_risk, FamilyId::surrogate_stack,
                    FamilyId::linear_orthogonal}) {
        if (to_string(id) == s) return id;
    }
    if (s == "logistic") return FamilyId::glm_logistic;
    if (s == "poisson") return FamilyId::glm_poisson;
    throw SchemaError(fmt::format("unknown equation family '{}'", s));
}

std::vector<Eigen::Index> CatePartition::effect_indices() const {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < effect_dim; ++j) idx.push_back(nuisance_dim + j);
    return idx;
}

EquationFamily EquationFamily::linear(FeatureMap design, Outcome outcome) {
    return {FamilyId::linear, std::move(design), {}, outcome, false};
}
EquationFamily EquationFamily::logistic(FeatureMap design, Outcome outcome) {
    return {FamilyId::glm_logistic, std::move(design), {}, outcome, false};
}
EquationFamily EquationFamily::poisson(FeatureMap design, Outcome outcome) {
    return {FamilyId::glm_poisson, std::move(design), {}, outcome, false};
}
EquationFamily EquationFamily::wcls(FeatureMap control, FeatureMap effect, bool marginal) {
    return {FamilyId::wcls_cate, std::move(control), std::move(effect), Outcome::primary, marginal};
}
EquationFamily EquationFamily::log_relative_risk(FeatureMap control, FeatureMap effect,
                                                 bool marginal) {
    return {FamilyId::log_relative_risk, std::move(control), std::move(effect), Outcome::primary,
            marginal};
}
EquationFamily EquationFamily::surrogate_stack(FeatureMap design) {
    return {FamilyId::surrogate_stack, std::move(design), {}, Outcome::primary, false};
}
EquationFamily EquationFamily::linear_orthogonal(FeatureMap x_block, FeatureMap z_block) {
    return {FamilyId::linear_orthogonal, std::move(x_block), std::move(z_block), Outcome::primary,
            false};
}

Eigen::Index EquationFamily::param_dim() const {
    switch (id) {
        case FamilyId::surrogate_stack: return 2 * design.width();
        case FamilyId::wcls_cate:
        case FamilyId::log_relative_risk:
        case FamilyId::linear_orthogonal: return design.width() + effect.width();
        default: return design.width();
    }
}

bool EquationFamily::linear_in_params() const {
    return id == FamilyId::linear || id == FamilyId::surrogate_stack ||
           id == FamilyId::linear_orthogonal || id == FamilyId::wcls_cate;
}

CatePartition EquationFamily::cate_partition() const {
    if (id != FamilyId::wcls_cate && id != FamilyId::log_relative_risk)
        return {param_dim(), 0};
    return {design.width(), effect.width()};
}

void EquationFamily::validate(const Dataset& data) const {
    if (design.empty()) throw SchemaError(fmt::format("{} family has an empty design", to_string(id)));
    const bool two_block = id == FamilyId::wcls_cate || id == FamilyId::log_relative_risk ||
                           id == FamilyId::linear_orthogonal;
    if (two_block && effect.empty())
        throw SchemaError(fmt::format("{} family needs effect features", to_string(id)));
    if (uses_z() && !data.has_z())
        throw SchemaError(fmt::format("{} family uses z columns but the dataset has none", to_string(id)));
    if (id == FamilyId::surrogate_stack || outcome == Outcome::secondary) (void)data.y2();
    if (id == FamilyId::wcls_cate || id == FamilyId::log_relative_risk) {
        (void)data.a();
        (void)propensity_of(*this, data);
    }
    const VectorXd& y = id == FamilyId::surrogate_stack ? data.y() : outcome_of(*this, data);
    if (id == FamilyId::log_relative_risk || id == FamilyId::glm_poisson) {
        if ((y.array() < 0.0).any())
            throw SchemaError(fmt::format("{} requires a nonnegative outcome", to_string(id)));
    }
    if (id == FamilyId::glm_logistic) {
        if ((y.array() < 0.0).any() || (y.array() > 1.0).any())
            throw SchemaError("glm_logistic requires outcomes in [0, 1]");
    }
}

MatrixXd JacobianStack::at(Eigen::Index i) const {
    const auto p = left.front().cols();
    MatrixXd j = MatrixXd::Zero(p, p);
    for (std::size_t k = 0; k < left.size(); ++k)
        j.noalias() += left[k].row(i).transpose() * right[k].row(i);
    return j;
}

MatrixXd JacobianStack::weighted_mean(const VectorXd& w) const {
    const auto p = left.front().cols();
    MatrixXd j = MatrixXd::Zero(p, p);
    for (std::size_t k = 0; k < left.size(); ++k)
        j.noalias() += left[k].transpose() * (w.asDiagonal() * right[k]);
    return j / w.sum();
}

VectorXd weighted_mean_score(const MatrixXd& scores, const VectorXd& w) {
    return scores.transpose() * w / w.sum();
}

EquationEval eval_equation(const EquationFamily& fam, const Dataset& data, const VectorXd& params) {
    fam.validate(data);
    if (params.size() != fam.param_dim())
        throw SchemaError(fmt::format("{} expects {} parameters, got {}", to_string(fam.id),
                                      fam.param_dim(), params.size()));
    if (!params.allFinite()) throw NumericError("eval_equation: non-finite parameters");

    EquationEval out;
    const MatrixXd h = fam.design.materialize(data);
    const auto n = data.n();

    switch (fam.id) {
        case FamilyId::linear: {
            const VectorXd r = outcome_of(fam, data) - h * params;
            out.scores = h.array().colwise() * r.array();
            out.jacobian.left = {-h};
            out.jacobian.right = {h};
            break;
        }
        case FamilyId::glm_logistic:
        case FamilyId::glm_poisson: {
            VectorXd eta = h * params;
            clamp_eta(eta, out.clamped_rows);
            const Link l = canonical_link(fam.id, eta);
            const VectorXd r = outcome_of(fam, data) - l.mean;
            out.scores = h.array().colwise() * r.array();
            out.jacobian.left = {-(h.array().colwise() * l.deriv.array()).matrix()};
            out.jacobian.right = {h};
            break;
        }
        case FamilyId::wcls_cate:
        case FamilyId::log_relative_risk: {
            const MatrixXd f = fam.effect.materialize(data);
            const VectorXd& a = data.a();
            const VectorXd centered = a - propensity_of(fam, data);
            const MatrixXd d = hstack(h, f.array().colwise() * centered.array());
            const auto pg = h.cols();
            const VectorXd alpha = params.head(pg);
            const VectorXd gamma = params.tail(f.cols());
            if (fam.id == FamilyId::wcls_cate) {
                const VectorXd r = data.y() - h * alpha - (centered.array() * (f * gamma).array()).matrix();
                out.scores = d.array().colwise() * r.array();
                out.jacobian.left = {-d};
                out.jacobian.right = {d};
            } else {
                VectorXd base = h * alpha;
                VectorXd shift = (a.array() * (f * gamma).array()).matrix();
                clamp_eta(base, out.clamped_rows);
                clamp_eta(shift, out.clamped_rows);
                const VectorXd e_base = base.array().exp();
                const VectorXd e_neg_shift = (-shift.array()).exp();
                // e^{-a fγ}(y - e^{gα + a fγ}) = y e^{-a fγ} - e^{gα}
                const VectorXd r = (data.y().array() * e_neg_shift.array()).matrix() - e_base;
                out.scores = d.array().colwise() * r.array();
                const VectorXd dshift = -(a.array() * data.y().array() * e_neg_shift.array()).matrix();
                out.jacobian.left = {d};
                out.jacobian.right = {hstack(-(h.array().colwise() * e_base.array()).matrix(),
                                             f.array().colwise() * dshift.array())};
            }
            break;
        }
        case FamilyId::surrogate_stack: {
            const auto w = h.cols();
            const VectorXd r1 = data.y() - h * params.head(w);
            const VectorXd r2 = data.y2() - h * params.tail(w);
            out.scores = hstack(h.array().colwise() * r1.array(), h.array().colwise() * r2.array());
            const MatrixXd zero = MatrixXd::Zero(n, w);
            out.jacobian.left = {hstack(-h, zero), hstack(zero, -h)};
            out.jacobian.right = {hstack(h, zero), hstack(zero, h)};
            break;
        }
        case FamilyId::linear_orthogonal: {
            const MatrixXd zt = fam.effect.materialize(data);
            const VectorXd rx = data.y() - h * params.head(h.cols());
            const VectorXd rz = rx - zt * params.tail(zt.cols());
            out.scores = hstack(h.array().colwise() * rx.array(), zt.array().colwise() * rz.array());
            const MatrixXd zero_x = MatrixXd::Zero(n, h.cols());
            const MatrixXd zero_z = MatrixXd::Zero(n, zt.cols());
            out.jacobian.left = {-hstack(h, zt), -hstack(zero_x, zt)};
            out.jacobian.right = {hstack(h, zero_z), hstack(zero_x, zt)};
            break;
        }
    }
    check_finite_rows(out.scores, fam);
    return out;
}

MatrixXd predict_design(const EquationFamily& fam, const Dataset& data, bool effect_only) {
    fam.validate(data);
    switch (fam.id) {
        case FamilyId::wcls_cate:
        case FamilyId::log_relative_risk: {
            MatrixXd f = fam.effect.materialize(data);
            if (effect_only) return f;
            return hstack(fam.design.materialize(data), f);
        }
        case FamilyId::linear_orthogonal:
            return hstack(fam.design.materialize(data), fam.effect.materialize(data));
        default:
            return fam.design.materialize(data);
    }
}

Dataset orthogonalize_z(const Dataset& data, const FeatureMap& x_features) {
    const MatrixXd x = x_features.materialize(data);
    const MatrixXd& z = data.z();
    const VectorXd& w = data.obs_weights();
    const MatrixXd xtwx = x.transpose() * w.asDiagonal() * x;
    const MatrixXd b = reg_solve(SymMatrix(xtwx), x.transpose() * w.asDiagonal() * z).x;
    return data.with_z(z - x * b);
}

VectorXd fit_propensity(const Dataset& data, const FeatureMap& features) {
    Dataset::Columns c;
    c.y = data.a();
    c.x = features.materialize(data);
    c.obs_weights = data.obs_weights();
    const Dataset treat(std::move(c));
    const auto fam = EquationFamily::logistic(FeatureMap::columns(treat.x().cols(), 0, false));
    const auto fit = solve(fam, treat);
    VectorXd p = (1.0 + (-(treat.x() * fit.params).array()).exp()).inverse().matrix();
    return p.array().max(1e-6).min(1.0 - 1e-6).matrix();
}

}  // namespace mfuse
