#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mfuse {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Map h: ℝᵖ → ℝᵖ' under which external and internal estimates share a limit.
class Transformation {
public:
    enum class Kind { identity, subset, ratio, custom };

    static Transformation identity(Eigen::Index p);
    /// Keeps the listed coordinates in order.
    static Transformation subset(Eigen::Index p, std::vector<Eigen::Index> keep);
    /// θ_num / θ_den for each numerator; `numerators` defaults to every
    /// coordinate other than the denominator.
    static Transformation ratio(Eigen::Index p, Eigen::Index denominator,
                                std::vector<Eigen::Index> numerators = {});
    /// User-supplied map; its gradient is taken by central differences.
    static Transformation custom(Eigen::Index p, Eigen::Index out_dim,
                                 std::function<VectorXd(const VectorXd&)> fn,
                                 std::string label = "custom");

    /// Builds from the textual declaration used in config and summary files.
    static Transformation from_declaration(const std::string& kind, Eigen::Index p,
                                           const std::vector<Eigen::Index>& indices);

    Kind kind() const noexcept { return kind_; }
    Eigen::Index in_dim() const noexcept { return in_dim_; }
    Eigen::Index out_dim() const noexcept { return out_dim_; }
    /// For subset: kept coordinates. For ratio: denominator then numerators.
    const std::vector<Eigen::Index>& indices() const noexcept { return indices_; }
    std::string kind_name() const;

    VectorXd apply(const VectorXd& theta) const;
    /// p × p' matrix whose columns are the gradients of the outputs.
    MatrixXd gradient(const VectorXd& theta) const;

    /// Same kind and index list (custom maps compare by label).
    bool same_declaration(const Transformation& other) const;

private:
    Kind kind_ = Kind::identity;
    Eigen::Index in_dim_ = 0;
    Eigen::Index out_dim_ = 0;
    std::vector<Eigen::Index> indices_;
    std::function<VectorXd(const VectorXd&)> fn_;
    std::string label_;

    void check_input(const VectorXd& theta) const;
};

/// ∇hᵀ Σ ∇h.
MatrixXd delta_method(const MatrixXd& grad, const MatrixXd& sigma);

/// Central-difference Jacobian with step 1e-6·(1 + |θⱼ|), oriented p × p'.
MatrixXd numeric_gradient(const std::function<VectorXd(const VectorXd&)>& fn, const VectorXd& theta);

}  // namespace mfuse
