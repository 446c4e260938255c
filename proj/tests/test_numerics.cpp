#include <doctest.h>

#include <random>

#include "mfuse/errors.hpp"
#include "mfuse/numerics.hpp"
#include "oracles.hpp"

using namespace mfuse;

namespace {

MatrixXd random_spd(int dim, unsigned seed, double shift = 0.1) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> nd;
    MatrixXd b(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) b(i, j) = nd(gen);
    return b * b.transpose() + shift * MatrixXd::Identity(dim, dim);
}

}  // namespace

TEST_CASE("SymMatrix symmetrizes its input") {
    MatrixXd m(2, 2);
    m << 1, 2, 4, 3;
    const SymMatrix s(m);
    CHECK(s(0, 1) == 3.0);
    CHECK(s(1, 0) == 3.0);
    CHECK(SymMatrix::diagonal(VectorXd::Constant(3, 2.0)).matrix() == 2.0 * MatrixXd::Identity(3, 3));
}

TEST_CASE("eigendecomposition agrees with cyclic Jacobi") {
    for (unsigned seed = 1; seed <= 20; ++seed) {
        const int dim = 2 + static_cast<int>(seed % 7);
        const MatrixXd m = random_spd(dim, seed) - 3.0 * MatrixXd::Identity(dim, dim);
        const SymEigen e = sym_eigen(SymMatrix(m));
        const auto [values, vectors] = oracle::jacobi_eigen(m);
        CHECK((e.values - values).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((e.vectors * e.values.asDiagonal() * e.vectors.transpose() - m).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(std::abs(min_eigenvalue(m) - values(0)) < 1e-10);
        CHECK(std::abs(spectral_norm(SymMatrix(m)) - values.cwiseAbs().maxCoeff()) < 1e-10);
    }
}

TEST_CASE("inv_sqrt squares to the inverse") {
    const MatrixXd m = random_spd(5, 7);
    const MatrixXd r = inv_sqrt(SymMatrix(m)).matrix();
    CHECK((r * m * r - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("inv_sqrt rejects singular and indefinite input") {
    MatrixXd singular = MatrixXd::Zero(3, 3);
    singular(0, 0) = 1.0;
    CHECK_THROWS_AS(inv_sqrt(SymMatrix(singular)), IllConditionedError);
    MatrixXd indefinite = MatrixXd::Identity(2, 2);
    indefinite(1, 1) = -1.0;
    CHECK_THROWS_AS(inv_sqrt(SymMatrix(indefinite)), Error);
}

TEST_CASE("reg_solve solves well-posed systems without a ridge") {
    const MatrixXd m = random_spd(6, 3);
    const MatrixXd rhs = MatrixXd::Random(6, 2);
    const RegSolve r = reg_solve(SymMatrix(m), rhs);
    CHECK_FALSE(r.ridge_fallback);
    CHECK((m * r.x - rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("reg_solve falls back to a ridge on a singular matrix") {
    MatrixXd m = MatrixXd::Zero(3, 3);
    m.topLeftCorner(2, 2) = MatrixXd::Identity(2, 2);
    const RegSolve r = reg_solve(SymMatrix(m), VectorXd::Ones(3));
    CHECK(r.ridge_fallback);
    CHECK(r.ridge > 0.0);
}

TEST_CASE("non-finite input is rejected") {
    MatrixXd m = MatrixXd::Identity(2, 2);
    m(0, 1) = m(1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(all_finite(m));
    CHECK_THROWS_AS(reg_solve(SymMatrix(m), VectorXd::Ones(2)), NumericError);
}

TEST_CASE("general_solve handles nonsymmetric matrices") {
    MatrixXd m(3, 3);
    m << 2, 1, 0, 0, 3, 1, 1, 0, 4;
    const VectorXd rhs = VectorXd::LinSpaced(3, 1, 3);
    CHECK((m * general_solve(m, rhs).x - rhs).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((checked_inverse(m) * m - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
}
