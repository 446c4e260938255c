#include <doctest.h>

#include <random>

#include "mfuse/equations.hpp"
#include "mfuse/errors.hpp"
#include "oracles.hpp"

using namespace mfuse;
using Eigen::Index;

namespace {

struct Rich {
    Dataset continuous;
    Dataset binary;
};

Rich rich_data(unsigned seed) {
    const Dataset base = oracle::gaussian_dataset(80, 3, 2, seed);
    std::mt19937_64 gen(seed + 1);
    std::uniform_real_distribution<double> ud(0.2, 0.8);
    Dataset::Columns c = base.columns();
    c.a = VectorXd(base.n());
    c.propensity = VectorXd(base.n());
    c.propensity_x = VectorXd(base.n());
    for (Index i = 0; i < base.n(); ++i) {
        (*c.propensity)(i) = ud(gen);
        (*c.propensity_x)(i) = ud(gen);
        (*c.a)(i) = ud(gen) < 0.5 ? 1.0 : 0.0;
        c.y(i) = std::abs(c.y(i));
    }
    Dataset::Columns b = c;
    for (Index i = 0; i < base.n(); ++i) b.y(i) = ud(gen) < 0.5 ? 1.0 : 0.0;
    return {Dataset(c), Dataset(b)};
}

std::vector<std::pair<EquationFamily, bool>> all_families() {
    const FeatureMap xf = FeatureMap::columns(4, 0, false);
    const FeatureMap eff({Term::x(0), Term::x(1), Term::z(0)});
    return {
        {EquationFamily::linear(FeatureMap::columns(4, 2, true)), false},
        {EquationFamily::linear(xf, Outcome::secondary), false},
        {EquationFamily::logistic(FeatureMap::columns(4, 2, true)), true},
        {EquationFamily::poisson(xf), false},
        {EquationFamily::wcls(xf, eff, false), false},
        {EquationFamily::wcls(xf, FeatureMap({Term::x(0), Term::x(2)}), true), false},
        {EquationFamily::log_relative_risk(xf, eff, false), false},
        {EquationFamily::surrogate_stack(xf), false},
        {EquationFamily::linear_orthogonal(xf, FeatureMap::columns(0, 2, true)), false},
    };
}

}  // namespace

TEST_CASE("analytic Jacobians match central differences") {
    const Rich d = rich_data(11);
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    for (const auto& [fam, binary] : all_families()) {
        const Dataset& data = binary ? d.binary : d.continuous;
        VectorXd params(fam.param_dim());
        for (Index k = 0; k < params.size(); ++k) params(k) = 0.2 * nd(gen);
        const EquationEval e = eval_equation(fam, data, params);
        REQUIRE(e.scores.rows() == data.n());
        REQUIRE(e.scores.cols() == fam.param_dim());
        for (Index i = 0; i < data.n(); i += 5) {
            const MatrixXd fd = oracle::fd_row_jacobian(fam, data, params, i);
            const MatrixXd an = e.jacobian.at(i);
            CAPTURE(to_string(fam.id));
            CHECK((fd - an).cwiseAbs().maxCoeff() < 1e-6 * std::max(1.0, an.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("weighted mean Jacobian matches the row average") {
    const Rich d = rich_data(12);
    const auto fam = EquationFamily::poisson(FeatureMap::columns(4, 0, false));
    const VectorXd params = VectorXd::Constant(4, 0.1);
    const EquationEval e = eval_equation(fam, d.continuous, params);
    VectorXd w = VectorXd::LinSpaced(d.continuous.n(), 0.5, 2.0);
    MatrixXd manual = MatrixXd::Zero(4, 4);
    for (Index i = 0; i < w.size(); ++i) manual += w(i) * e.jacobian.at(i);
    manual /= w.sum();
    CHECK((e.jacobian.weighted_mean(w) - manual).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("family names round trip") {
    for (auto id : {FamilyId::linear, FamilyId::glm_logistic, FamilyId::glm_poisson, FamilyId::wcls_cate,
                    FamilyId::log_relative_risk, FamilyId::surrogate_stack, FamilyId::linear_orthogonal})
        CHECK(family_from_string(to_string(id)) == id);
    CHECK_THROWS_AS(family_from_string("probit"), SchemaError);
}

TEST_CASE("feature parsing accepts indices, names and products") {
    const std::vector<std::string> xn = {"one", "age", "bmi"}, zn = {"score"};
    const FeatureMap m = FeatureMap::parse("x0,age,z0,bmi*score", xn, zn);
    REQUIRE(m.width() == 4);
    CHECK(m.uses_z());
    const Dataset d = oracle::gaussian_dataset(10, 2, 1, 5);
    const MatrixXd h = m.materialize(d);
    CHECK(h.col(3).isApprox(d.x().col(2).cwiseProduct(d.z().col(0))));
    CHECK_THROWS(FeatureMap::parse("x9", xn, zn).materialize(d));
}

TEST_CASE("validation rejects mismatched data") {
    const Dataset d = oracle::gaussian_dataset(20, 2, 0, 6);
    CHECK_THROWS_AS(EquationFamily::linear(FeatureMap::columns(3, 1, true)).validate(d), SchemaError);
    CHECK_THROWS_AS(EquationFamily::logistic(FeatureMap::columns(3, 0, false)).validate(d), SchemaError);
    CHECK_THROWS_AS(EquationFamily::wcls(FeatureMap::columns(3, 0, false), FeatureMap({Term::x(0)}), false).validate(d),
                    SchemaError);
    CHECK_THROWS_AS(eval_equation(EquationFamily::linear(FeatureMap::columns(3, 0, false)), d, VectorXd::Zero(2)),
                    SchemaError);
}

TEST_CASE("orthogonalized z has zero weighted cross product with x") {
    const Dataset d = oracle::gaussian_dataset(200, 3, 2, 7);
    const FeatureMap xf = FeatureMap::columns(4, 0, false);
    const Dataset o = orthogonalize_z(d, xf);
    CHECK((d.x().transpose() * o.z()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("fitted propensity stays in the clip range") {
    Dataset::Columns c = oracle::gaussian_dataset(300, 2, 0, 8).columns();
    c.a = VectorXd(300);
    for (Index i = 0; i < 300; ++i) (*c.a)(i) = c.x(i, 1) > 0 ? 1.0 : 0.0;
    const Dataset d(c);
    const VectorXd p = fit_propensity(d, FeatureMap({Term::x(0), Term::x(2)}));
    CHECK(p.minCoeff() >= 1e-6);
    CHECK(p.maxCoeff() <= 1 - 1e-6);
}
