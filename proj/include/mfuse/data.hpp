#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mfuse {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Per-row study data. `x` holds the covariates shared with the external
/// model (its first column is normally the intercept); `z` holds the
/// auxiliary covariates only the internal study measures.
///
/// Immutable after construction: use the `with_*` helpers to derive variants.
class Dataset {
public:
    struct Columns {
        VectorXd y;
        std::optional<VectorXd> y2;
        MatrixXd x;
        std::optional<MatrixXd> z;
        std::optional<VectorXd> a;
        std::optional<VectorXd> propensity;    // P(A = 1 | x, z)
        std::optional<VectorXd> propensity_x;  // P(A = 1 | x)
        std::optional<VectorXd> obs_weights;
        std::vector<std::string> x_names;
        std::vector<std::string> z_names;
    };

    explicit Dataset(Columns cols);

    Eigen::Index n() const noexcept { return cols_.y.size(); }
    const VectorXd& y() const noexcept { return cols_.y; }
    const VectorXd& y2() const;
    const MatrixXd& x() const noexcept { return cols_.x; }
    const MatrixXd& z() const;
    const VectorXd& a() const;
    const VectorXd& propensity() const;
    const VectorXd& propensity_x() const;
    const VectorXd& obs_weights() const noexcept { return weights_; }

    bool has_y2() const noexcept { return cols_.y2.has_value(); }
    bool has_z() const noexcept { return cols_.z.has_value(); }
    bool has_a() const noexcept { return cols_.a.has_value(); }
    bool has_propensity() const noexcept { return cols_.propensity.has_value(); }
    bool has_propensity_x() const noexcept { return cols_.propensity_x.has_value(); }

    const std::vector<std::string>& x_names() const noexcept { return cols_.x_names; }
    const std::vector<std::string>& z_names() const noexcept { return cols_.z_names; }
    const Columns& columns() const noexcept { return cols_; }

    Dataset with_weights(VectorXd w) const;
    Dataset with_z(MatrixXd z) const;
    /// Rows `idx` in the given order.
    Dataset select_rows(const std::vector<Eigen::Index>& idx) const;

private:
    Columns cols_;
    VectorXd weights_;
};

/// One regression feature: the product of the referenced columns. A single
/// reference is the column itself.
struct Term {
    enum class Block { x, z };
    struct Ref {
        Block block;
        Eigen::Index index;
    };
    std::vector<Ref> factors;

    static Term x(Eigen::Index j) { return Term{{{Block::x, j}}}; }
    static Term z(Eigen::Index j) { return Term{{{Block::z, j}}}; }
    Term operator*(const Term& other) const;
};

/// Ordered list of features forming a design matrix.
class FeatureMap {
public:
    FeatureMap() = default;
    explicit FeatureMap(std::vector<Term> terms) : terms_(std::move(terms)) {}

    /// All x columns, then all z columns when `with_z`.
    static FeatureMap columns(Eigen::Index x_cols, Eigen::Index z_cols, bool with_z);

    /// Parses "x0,x1,z0,x2*z1" style specifications; names may also refer to
    /// the dataset's column names.
    static FeatureMap parse(const std::string& spec, const std::vector<std::string>& x_names,
                            const std::vector<std::string>& z_names);

    Eigen::Index width() const noexcept { return static_cast<Eigen::Index>(terms_.size()); }
    const std::vector<Term>& terms() const noexcept { return terms_; }
    bool uses_z() const noexcept;
    bool empty() const noexcept { return terms_.empty(); }

    MatrixXd materialize(const Dataset& data) const;

private:
    std::vector<Term> terms_;
};

}  // namespace mfuse
