#include <doctest.h>

#include <cmath>
#include <random>

#include "mfuse/errors.hpp"
#include "mfuse/io.hpp"
#include "mfuse/parallel.hpp"
#include "mfuse/scenarios.hpp"

using namespace mfuse;
using Eigen::Index;

namespace {

ScenarioSpec quick(ScenarioKind kind) {
    ScenarioSpec s;
    s.kind = kind;
    s.mc_replicates = 6;
    s.n_external = 2000;
    s.truth_n = 20000;
    s.eval_n = 2000;
    s.offsets = {0.0, 0.2};
    s.rho_grid = {0.7, 1.0};
    return s;
}

}  // namespace

TEST_CASE("default offset grid has 13 points from 0 to 0.3") {
    const auto o = ScenarioSpec::default_offsets();
    REQUIRE(o.size() == 13);
    CHECK(o.front() == 0.0);
    CHECK(o.back() == doctest::Approx(0.3));
    CHECK(o[1] == doctest::Approx(0.025));
}

TEST_CASE("scenario validation names the field") {
    ScenarioSpec s;
    s.n_internal = 3;
    try {
        s.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("scenario.n_internal") != std::string::npos);
    }
    s = {};
    s.rho = 1.5;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = {};
    s.offsets = {};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK_THROWS_AS(scenario_kind_from_string("poisson"), ConfigError);
    CHECK(scenario_kind_from_string("missing_covariate") == ScenarioKind::missing_covariate);
}

TEST_CASE("Gauss-Hermite rule integrates normal moments") {
    const auto [nodes, weights] = gauss_hermite_normal(40);
    CHECK(weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(weights.dot(nodes) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(weights.dot(nodes.array().square().matrix()) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(weights.dot(nodes.array().pow(4).matrix()) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("marginal propensity averages over the auxiliary covariate") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    double mc = 0;
    const int n = 400000;
    for (int i = 0; i < n; ++i) mc += 1 / (1 + std::exp(-(0.1 + 0.3 * 1.2 + 0.8 * nd(gen))));
    CHECK(marginal_propensity(0.1, 0.3, 0.8, 1.2) == doctest::Approx(mc / n).epsilon(2e-3));
    CHECK(marginal_propensity(0.0, 0.0, 0.0, 3.0) == doctest::Approx(0.5));
}

TEST_CASE("generated data have the documented shape") {
    ScenarioSpec s;
    const GeneratedData g = generate(s, 0.1, 17);
    CHECK(g.internal.n() == 200);
    CHECK(g.internal.x().cols() == 6);
    CHECK(g.internal.z().cols() == 2);
    REQUIRE(g.external.has_value());
    CHECK(g.external->n() == 20000);
    CHECK((g.internal.x().col(0).array() == 1.0).all());

    s.kind = ScenarioKind::missing_covariate;
    const GeneratedData m = generate(s, 0.0, 18);
    CHECK_FALSE(m.external.has_value());
    Index missing = 0;
    for (Index i = 0; i < m.internal.n(); ++i)
        if (!m.observed[static_cast<std::size_t>(i)]) {
            ++missing;
            CHECK(std::isnan(m.internal.z()(i, 0)));
        }
    CHECK(missing > 0);
    CHECK(missing < m.internal.n());
}

TEST_CASE("every kind runs; internal relative PMSE is exactly one") {
    for (auto kind : {ScenarioKind::linear, ScenarioKind::logistic, ScenarioKind::cate, ScenarioKind::surrogate,
                      ScenarioKind::missing_outcome, ScenarioKind::missing_covariate}) {
        CAPTURE(to_string(kind));
        const ScenarioReport r = run_scenario(quick(kind));
        const std::size_t blocks = kind == ScenarioKind::surrogate ? 2 : 1;
        CHECK(r.rows.size() == blocks * 2 * 3);
        CHECK(r.replicates.size() == blocks * 2 * 6);
        for (const auto& row : r.rows) {
            if (row.estimator == "internal") CHECK(row.rel_pmse_mean == 1.0);
            CHECK(std::isnan(row.coverage_all));
            CHECK(row.mean_js_weight >= 0.0);
            CHECK(row.mean_js_weight <= 1.0);
        }
    }
}

TEST_CASE("reports are reproducible and thread independent") {
    ScenarioSpec s = quick(ScenarioKind::linear);
    s.coverage = true;
    s.bootstrap_replicates = 20;
    const std::string a = scenario_report_csv(run_scenario(s));
    s.threads = 3;
    CHECK(scenario_report_csv(run_scenario(s)) == a);
    s.base_seed += 1;
    CHECK(scenario_report_csv(run_scenario(s)) != a);
}

TEST_CASE("missing-outcome workflow rejects degenerate splits") {
    ScenarioSpec s;
    s.kind = ScenarioKind::missing_outcome;
    const GeneratedData g = generate(s, 0.0, 19);
    const ScenarioModels m = scenario_models(s);
    const std::vector<bool> all(static_cast<std::size_t>(g.internal.n()), true);
    CHECK_THROWS_AS(missing_outcome_workflow(g.internal, all, std::nullopt, m.psi.design, m.phi.design),
                    InsufficientDataError);
    const std::vector<bool> none(static_cast<std::size_t>(g.internal.n()), false);
    CHECK_THROWS_AS(missing_outcome_workflow(g.internal, none, std::nullopt, m.psi.design, m.phi.design),
                    InsufficientDataError);
    CHECK_THROWS_AS(missing_outcome_workflow(g.internal, g.observed, VectorXd::Ones(3), m.psi.design, m.phi.design),
                    SchemaError);
    const FusionInputs in =
        missing_outcome_workflow(g.internal, g.observed, VectorXd::LinSpaced(8, 0.1, 0.8), m.psi.design, m.phi.design);
    CHECK(in.internal.n() + in.external.n_external == g.internal.n());
}

TEST_CASE("missing-covariate workflow rejects degenerate splits") {
    ScenarioSpec s;
    s.kind = ScenarioKind::missing_covariate;
    const GeneratedData g = generate(s, 0.0, 20);
    const ScenarioModels m = scenario_models(s);
    const std::vector<bool> all(static_cast<std::size_t>(g.internal.n()), true);
    const std::vector<bool> none(static_cast<std::size_t>(g.internal.n()), false);
    CHECK_THROWS_AS(missing_covariate_workflow(g.internal, all, m.psi.design, m.phi.design), InsufficientDataError);
    CHECK_THROWS_AS(missing_covariate_workflow(g.internal, none, m.psi.design, m.phi.design), InsufficientDataError);
}

TEST_CASE("missing-outcome gain tracks the share of missing rows") {
    // Shared design, bivariate normal outcomes, half the outcomes missing at
    // random: the correction is n_mis/(n_obs + n_mis) · ρ · σ₁/σ₂ times the
    // secondary-endpoint difference.
    const double rho = 0.8, s1 = 2.0, s2 = 1.0;
    const Index n = 2000;
    const FeatureMap design = FeatureMap::columns(3, 0, false);
    double num = 0, den = 0, expected = 0;
    for (int r = 0; r < 500; ++r) {
        std::mt19937_64 gen(replicate_seed(2024, 0, static_cast<std::uint64_t>(r)));
        std::normal_distribution<double> nd;
        std::bernoulli_distribution miss(0.5);
        Dataset::Columns c;
        c.x = MatrixXd::Ones(n, 3);
        c.y.resize(n);
        c.y2 = VectorXd(n);
        std::vector<bool> observed(static_cast<std::size_t>(n));
        Index n_obs = 0;
        for (Index i = 0; i < n; ++i) {
            c.x(i, 1) = nd(gen);
            c.x(i, 2) = nd(gen);
            const double mu = 1.0 + 0.5 * c.x(i, 1) - 0.5 * c.x(i, 2);
            const double e1 = nd(gen), e2 = nd(gen);
            c.y(i) = mu + s1 * e1;
            (*c.y2)(i) = mu + s2 * (rho * e1 + std::sqrt(1 - rho * rho) * e2);
            observed[static_cast<std::size_t>(i)] = !miss(gen);
            n_obs += observed[static_cast<std::size_t>(i)] ? 1 : 0;
        }
        const FusionInputs in = missing_outcome_workflow(Dataset(c), observed, std::nullopt, design, design);
        const ConditionalResult cr =
            conditional_estimate(fit_joint(in.psi, in.phi, in.internal), in.external, in.transform);
        const VectorXd corr = cr.gamma_cond - cr.gamma_internal;
        const VectorXd diff = cr.theta_external - cr.theta_internal;
        num += corr.dot(diff);
        den += diff.squaredNorm();
        expected += static_cast<double>(n - n_obs) / static_cast<double>(n) * rho * s1 / s2;
    }
    const double slope = num / den;
    expected /= 500.0;
    CHECK(std::abs(slope / expected - 1.0) < 0.15);
}

TEST_CASE("missing-covariate fusion beats complete-case analysis at zero heterogeneity") {
    ScenarioSpec s;
    s.kind = ScenarioKind::missing_covariate;
    s.offsets = {0.0};
    s.mc_replicates = 200;
    s.truth_n = 200000;
    s.eval_n = 5000;
    const ScenarioReport r = run_scenario(s);
    double cond = 0;
    for (const auto& row : r.rows)
        if (row.estimator == "conditional") cond = row.rel_pmse_mean;
    CHECK(cond < 1.0);
}
