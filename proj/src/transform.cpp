#include "mfuse/transform.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mfuse/errors.hpp"

namespace mfuse {

namespace {

constexpr double kMinDenominator = 1e-8;

void check_index(Eigen::Index i, Eigen::Index p) {
    if (i < 0 || i >= p)
        throw SchemaError(fmt::format("transformation index {} outside 0..{}", i, p - 1));
}

}  // namespace

Transformation Transformation::identity(Eigen::Index p) {
    Transformation t;
    t.kind_ = Kind::identity;
    t.in_dim_ = t.out_dim_ = p;
    return t;
}

Transformation Transformation::subset(Eigen::Index p, std::vector<Eigen::Index> keep) {
    if (keep.empty()) throw SchemaError("subset transformation needs at least one coordinate");
    for (auto i : keep) check_index(i, p);
    Transformation t;
    t.kind_ = Kind::subset;
    t.in_dim_ = p;
    t.out_dim_ = static_cast<Eigen::Index>(keep.size());
    t.indices_ = std::move(keep);
    return t;
}

Transformation Transformation::ratio(Eigen::Index p, Eigen::Index denominator,
                                     std::vector<Eigen::Index> numerators) {
    check_index(denominator, p);
    if (numerators.empty())
        for (Eigen::Index j = 0; j < p; ++j)
            if (j != denominator) numerators.push_back(j);
    for (auto i : numerators) check_index(i, p);
    Transformation t;
    t.kind_ = Kind::ratio;
    t.in_dim_ = p;
    t.out_dim_ = static_cast<Eigen::Index>(numerators.size());
    t.indices_.push_back(denominator);
    t.indices_.insert(t.indices_.end(), numerators.begin(), numerators.end());
    return t;
}

Transformation Transformation::custom(Eigen::Index p, Eigen::Index out_dim,
                                      std::function<VectorXd(const VectorXd&)> fn,
                                      std::string label) {
    Transformation t;
    t.kind_ = Kind::custom;
    t.in_dim_ = p;
    t.out_dim_ = out_dim;
    t.fn_ = std::move(fn);
    t.label_ = std::move(label);
    return t;
}

Transformation Transformation::from_declaration(const std::string& kind, Eigen::Index p,
                                                const std::vector<Eigen::Index>& indices) {
    if (kind == "identity") return identity(p);
    if (kind == "subset") return subset(p, indices);
    if (kind == "ratio") {
        // First non-intercept coefficient when no denominator is declared.
        if (indices.empty()) return ratio(p, std::min<Eigen::Index>(1, p - 1));
        return ratio(p, indices.front(), {indices.begin() + 1, indices.end()});
    }
    throw SchemaError(fmt::format("unknown transformation '{}'", kind));
}

std::string Transformation::kind_name() const {
    switch (kind_) {
        case Kind::identity: return "identity";
        case Kind::subset: return "subset";
        case Kind::ratio: return "ratio";
        case Kind::custom: return label_;
    }
    return "unknown";
}

void Transformation::check_input(const VectorXd& theta) const {
    if (theta.size() != in_dim_)
        throw SchemaError(fmt::format("transformation expects {} coordinates, got {}", in_dim_,
                                      theta.size()));
    if (!theta.allFinite()) throw NumericError("transformation input is not finite");
    if (kind_ == Kind::ratio && std::abs(theta(indices_.front())) < kMinDenominator)
        throw DegenerateTransformError(
            fmt::format("ratio denominator θ[{}] = {:.3g} is below {:.0e} in magnitude",
                        indices_.front(), theta(indices_.front()), kMinDenominator));
}

VectorXd Transformation::apply(const VectorXd& theta) const {
    check_input(theta);
    switch (kind_) {
        case Kind::identity: return theta;
        case Kind::subset: {
            VectorXd out(out_dim_);
            for (Eigen::Index k = 0; k < out_dim_; ++k) out(k) = theta(indices_[static_cast<std::size_t>(k)]);
            return out;
        }
        case Kind::ratio: {
            const double den = theta(indices_.front());
            VectorXd out(out_dim_);
            for (Eigen::Index k = 0; k < out_dim_; ++k)
                out(k) = theta(indices_[static_cast<std::size_t>(k + 1)]) / den;
            return out;
        }
        case Kind::custom: {
            VectorXd out = fn_(theta);
            if (out.size() != out_dim_)
                throw SchemaError(fmt::format("custom transformation returned {} values, declared {}",
                                              out.size(), out_dim_));
            return out;
        }
    }
    return theta;
}

MatrixXd Transformation::gradient(const VectorXd& theta) const {
    check_input(theta);
    MatrixXd g = MatrixXd::Zero(in_dim_, out_dim_);
    switch (kind_) {
        case Kind::identity: return MatrixXd::Identity(in_dim_, in_dim_);
        case Kind::subset:
            for (Eigen::Index k = 0; k < out_dim_; ++k) g(indices_[static_cast<std::size_t>(k)], k) = 1.0;
            return g;
        case Kind::ratio: {
            const auto d = indices_.front();
            const double den = theta(d);
            for (Eigen::Index k = 0; k < out_dim_; ++k) {
                const auto j = indices_[static_cast<std::size_t>(k + 1)];
                g(j, k) += 1.0 / den;
                g(d, k) -= theta(j) / (den * den);
            }
            return g;
        }
        case Kind::custom:
            return numeric_gradient([this](const VectorXd& t) { return apply(t); }, theta);
    }
    return g;
}

bool Transformation::same_declaration(const Transformation& other) const {
    if (kind_ != other.kind_ || in_dim_ != other.in_dim_ || out_dim_ != other.out_dim_) return false;
    if (kind_ == Kind::custom) return label_ == other.label_;
    return indices_ == other.indices_;
}

MatrixXd delta_method(const MatrixXd& grad, const MatrixXd& sigma) {
    return grad.transpose() * sigma * grad;
}

MatrixXd numeric_gradient(const std::function<VectorXd(const VectorXd&)>& fn, const VectorXd& theta) {
    const VectorXd f0 = fn(theta);
    MatrixXd g(theta.size(), f0.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        const double h = 1e-6 * (1.0 + std::abs(theta(j)));
        VectorXd up = theta, down = theta;
        up(j) += h;
        down(j) -= h;
        g.row(j) = ((fn(up) - fn(down)) / (2.0 * h)).transpose();
    }
    return g;
}

}  // namespace mfuse
