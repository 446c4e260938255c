#include <doctest.h>

#include "mfuse/errors.hpp"
#include "mfuse/shrinkage.hpp"
#include "oracles.hpp"

using namespace mfuse;
using Eigen::Index;

namespace {

struct Fixture {
    Dataset internal;
    JointFit joint;
    ConditionalResult cond;
};

Fixture fixture(unsigned seed, double shift = 0.0) {
    const Dataset internal = oracle::gaussian_dataset(300, 4, 3, seed);
    const Dataset external = oracle::gaussian_dataset(6000, 4, 0, seed + 50);
    const auto psi = EquationFamily::linear(FeatureMap::columns(5, 0, false));
    const auto phi = EquationFamily::linear(FeatureMap::columns(5, 3, true));
    const auto t = Transformation::identity(5);
    JointFit j = fit_joint(psi, phi, internal);
    ExternalSummary ext = summarize_external(fit_model(psi, external), t);
    ext.theta_hat = ext.theta_hat.array() + shift;
    ConditionalResult c = conditional_estimate(j, ext, t);
    return {internal, std::move(j), std::move(c)};
}

}  // namespace

TEST_CASE("weight formula and fallbacks") {
    ShrinkageFallback f{};
    CHECK(cond_weight(2.0, 8.0, &f) == doctest::Approx(0.25));
    CHECK(f == ShrinkageFallback::none);
    CHECK(cond_weight(8.0, 2.0) == 1.0);
    CHECK(cond_weight(-1.0, 2.0, &f) == 0.0);
    CHECK(f == ShrinkageFallback::d_le_2);
    CHECK(cond_weight(1.0, 0.0, &f) == 0.0);
    CHECK(f == ShrinkageFallback::zero_denominator);
}

TEST_CASE("shrinkage estimate lies on the segment and matches the theta form") {
    for (unsigned seed = 61; seed < 66; ++seed) {
        const Fixture fx = fixture(seed, 0.02 * (seed - 61));
        for (auto kind : {WeightMatrixSpec::Kind::identity, WeightMatrixSpec::Kind::predictive,
                          WeightMatrixSpec::Kind::inverse_covariance}) {
            const SymMatrix a = build_A({kind, {}}, fx.joint, fx.internal);
            const ShrinkageResult r = james_stein(fx.cond, fx.joint, a);
            CHECK(r.weight >= 0.0);
            CHECK(r.weight <= 1.0);
            CHECK(std::abs(r.tau_star - (r.trace_j - 2.0 * r.norm_j)) < 1e-9 * std::abs(r.trace_j));
            CHECK(std::abs(r.weight - weight_from_theta_diff(fx.cond, a)) < 1e-10);
            const VectorXd seg = fx.cond.gamma_internal + r.weight * (fx.cond.gamma_cond - fx.cond.gamma_internal);
            CHECK((r.gamma_js - seg).cwiseAbs().maxCoeff() < 1e-12);
            const FrozenShrinkage fr = FrozenShrinkage::from(fx.cond, a);
            CHECK(std::abs(fr.weight(-fx.cond.h_diff) - r.weight) < 1e-10);
        }
    }
}

TEST_CASE("large discrepancies send the estimate back to the internal one") {
    const Fixture fx = fixture(67, 0.05);
    const SymMatrix a = build_A({WeightMatrixSpec::Kind::predictive, {}}, fx.joint, fx.internal);
    const FrozenShrinkage fr = FrozenShrinkage::from(fx.cond, a);
    REQUIRE(fr.applicable);
    const VectorXd diff = -fx.cond.h_diff;
    CHECK(fr.weight(1e3 * diff) <= 1e-3);
    double prev = 1.0;
    for (double scale : {0.01, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0}) {
        const double w = fr.weight(scale * diff);
        CHECK(w <= prev + 1e-15);
        prev = w;
    }
    CHECK(fr.weight(1e-6 * diff) == 1.0);
}

TEST_CASE("subset loss keeps only the listed block of the predictive Gram matrix") {
    const Fixture fx = fixture(68);
    const std::vector<Index> keep = {1, 5, 7};
    const SymMatrix full = build_A({WeightMatrixSpec::Kind::predictive, {}}, fx.joint, fx.internal);
    const SymMatrix sub = build_A(WeightMatrixSpec::from_string("pmse_subset", keep), fx.joint, fx.internal);
    MatrixXd h(fx.internal.n(), 8);
    h << fx.internal.x(), fx.internal.z();
    const MatrixXd gram = h.transpose() * h / static_cast<double>(h.rows());
    CHECK((full.matrix() - gram).cwiseAbs().maxCoeff() < 1e-12);
    for (Index i = 0; i < 8; ++i)
        for (Index j = 0; j < 8; ++j) {
            const bool in = std::count(keep.begin(), keep.end(), i) && std::count(keep.begin(), keep.end(), j);
            CHECK(sub(i, j) == doctest::Approx(in ? gram(i, j) : 0.0));
        }
    CHECK_THROWS_AS(WeightMatrixSpec::from_string("pmse_subset"), ConfigError);
    CHECK_THROWS_AS(WeightMatrixSpec::from_string("huber"), ConfigError);
    CHECK_THROWS_AS(build_A(WeightMatrixSpec::from_string("pmse_subset", {9}), fx.joint, fx.internal), SchemaError);
}

TEST_CASE("weight matrix dimension is checked") {
    const Fixture fx = fixture(69);
    CHECK_THROWS_AS(james_stein(fx.cond, fx.joint, SymMatrix::identity(3)), SchemaError);
}
