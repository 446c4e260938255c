#include "mfuse/numerics.hpp"

#include <cmath>

#include <fmt/format.h>

#include "mfuse/errors.hpp"

namespace mfuse {

namespace {

constexpr double kRcondFloor = 1e-14;

void require_finite(const MatrixXd& m, const char* what) {
    if (!all_finite(m)) throw NumericError(fmt::format("{}: non-finite entries", what));
}

// Eigen's LDLT accepts zero pivots and its rcond estimate can miss them.
bool ldlt_ok(const Eigen::LDLT<MatrixXd>& f) {
    if (f.info() != Eigen::Success || !(f.rcond() > kRcondFloor)) return false;
    const VectorXd d = f.vectorD().cwiseAbs();
    return d.minCoeff() > kRcondFloor * d.maxCoeff();
}

}  // namespace

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

SymMatrix::SymMatrix(const MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() < 1)
        throw SchemaError(fmt::format("SymMatrix needs a non-empty square matrix, got {}x{}",
                                      m.rows(), m.cols()));
    m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index dim) {
    return SymMatrix(MatrixXd::Identity(dim, dim));
}

SymMatrix SymMatrix::diagonal(const VectorXd& d) { return SymMatrix(MatrixXd(d.asDiagonal())); }

SymEigen sym_eigen(const SymMatrix& m) {
    require_finite(m.matrix(), "sym_eigen");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.matrix());
    if (es.info() != Eigen::Success) throw NumericError("sym_eigen: eigensolver did not converge");
    return {es.eigenvalues(), es.eigenvectors()};
}

double spectral_norm(const SymMatrix& m) {
    const auto e = sym_eigen(m);
    return std::max(std::abs(e.values(0)), std::abs(e.values(e.values.size() - 1)));
}

double min_eigenvalue(const MatrixXd& m) {
    return sym_eigen(SymMatrix(m)).values(0);
}

RegSolve reg_solve(const SymMatrix& m, const MatrixXd& rhs, double ridge) {
    if (ridge < 0) throw NumericError("reg_solve: ridge must be nonnegative");
    if (rhs.rows() != m.dim())
        throw SchemaError(fmt::format("reg_solve: rhs has {} rows, matrix is {}x{}", rhs.rows(),
                                      m.dim(), m.dim()));
    require_finite(m.matrix(), "reg_solve");
    const auto n = m.dim();
    const MatrixXd eye = MatrixXd::Identity(n, n);

    Eigen::LDLT<MatrixXd> f(m.matrix() + ridge * eye);
    if (ldlt_ok(f)) {
        MatrixXd x = f.solve(rhs);
        if (x.allFinite()) return {std::move(x), ridge, false};
    }
    if (ridge == 0.0) {
        const double fallback = 1e-10 * m.matrix().trace() / static_cast<double>(n);
        Eigen::LDLT<MatrixXd> g(m.matrix() + fallback * eye);
        if (fallback != 0.0 && ldlt_ok(g)) {
            MatrixXd x = g.solve(rhs);
            if (x.allFinite()) return {std::move(x), fallback, true};
        }
    }
    throw SingularMatrixError(fmt::format("reg_solve: {}x{} system is singular", n, n));
}

RegSolve general_solve(const MatrixXd& m, const MatrixXd& rhs) {
    if (m.rows() != m.cols() || rhs.rows() != m.rows())
        throw SchemaError("general_solve: dimension mismatch");
    require_finite(m, "general_solve");
    const auto n = m.rows();
    const MatrixXd eye = MatrixXd::Identity(n, n);

    auto attempt = [&](double ridge, RegSolve& out) {
        Eigen::PartialPivLU<MatrixXd> lu(m + ridge * eye);
        if (!(lu.rcond() > kRcondFloor)) return false;
        out.x = lu.solve(rhs);
        out.ridge = ridge;
        return out.x.allFinite();
    };

    RegSolve out;
    if (attempt(0.0, out)) return out;
    const double fallback = 1e-10 * m.trace() / static_cast<double>(n);
    if (fallback != 0.0 && attempt(fallback, out)) {
        out.ridge_fallback = true;
        return out;
    }
    throw SingularMatrixError(fmt::format("general_solve: {}x{} system is singular", n, n));
}

MatrixXd checked_inverse(const MatrixXd& m) {
    return general_solve(m, MatrixXd::Identity(m.rows(), m.cols())).x;
}

SymMatrix inv_sqrt(const SymMatrix& m) {
    const auto e = sym_eigen(m);
    const double top = std::max(std::abs(e.values(0)), std::abs(e.values(e.values.size() - 1)));
    const double floor = 1e-12 * top;
    for (Eigen::Index i = 0; i < e.values.size(); ++i) {
        if (!(e.values(i) > floor))
            throw IllConditionedError(
                fmt::format("inv_sqrt: eigenvalue {:.6g} at or below threshold {:.6g}",
                            e.values(i), floor));
    }
    const VectorXd scale = e.values.array().rsqrt();
    return SymMatrix(e.vectors * scale.asDiagonal() * e.vectors.transpose());
}

}  // namespace mfuse
