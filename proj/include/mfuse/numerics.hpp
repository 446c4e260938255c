#pragma once

#include <Eigen/Dense>

namespace mfuse {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Dense symmetric matrix. Construction symmetrizes the input as (M + Mᵀ)/2,
/// so every instance is exactly symmetric.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(const MatrixXd& m);

    static SymMatrix identity(Eigen::Index dim);
    static SymMatrix diagonal(const VectorXd& d);

    Eigen::Index dim() const noexcept { return m_.rows(); }
    const MatrixXd& matrix() const noexcept { return m_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
    MatrixXd m_;
};

struct SymEigen {
    VectorXd values;   // ascending
    MatrixXd vectors;  // columns
};

SymEigen sym_eigen(const SymMatrix& m);

/// Largest eigenvalue magnitude.
double spectral_norm(const SymMatrix& m);

struct RegSolve {
    MatrixXd x;
    double ridge = 0.0;
    bool ridge_fallback = false;
};

/// Solves (m + ridge·I) x = rhs with a pivoted LDLᵀ factorization. When the
/// factorization fails at ridge 0 the solve is retried once with
/// ridge = 1e-10·tr(m)/dim and `ridge_fallback` is set.
RegSolve reg_solve(const SymMatrix& m, const MatrixXd& rhs, double ridge = 0.0);

/// Same contract as reg_solve for a square matrix without symmetry
/// (Jacobians of the relative-risk equations are not symmetric).
RegSolve general_solve(const MatrixXd& m, const MatrixXd& rhs);

/// Inverse of a general square matrix through general_solve.
MatrixXd checked_inverse(const MatrixXd& m);

/// m^{-1/2} through the eigendecomposition. Requires every eigenvalue above
/// 1e-12·spectral_norm(m).
SymMatrix inv_sqrt(const SymMatrix& m);

/// Smallest eigenvalue of the symmetrized argument.
double min_eigenvalue(const MatrixXd& m);

bool all_finite(const MatrixXd& m);

}  // namespace mfuse
