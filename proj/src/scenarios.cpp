#include "mfuse/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "mfuse/bootstrap.hpp"
#include "mfuse/errors.hpp"
#include "mfuse/numerics.hpp"
#include "mfuse/parallel.hpp"
#include "mfuse/sandwich.hpp"

namespace mfuse {

namespace {

constexpr double kMaxFailedShare = 0.05;
constexpr Eigen::Index kXCols = 6;  // intercept, X1..X5
constexpr Eigen::Index kZCols = 2;

const std::vector<std::string> kXNames = {"intercept", "x1", "x2", "x3", "x4", "x5"};
const std::vector<std::string> kZNames = {"z1", "z2"};

double expit(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct Row {
    double x[6];
    double z[2];
};

/// Draws rows of the shared covariate law.
class CovariateSampler {
public:
    explicit CovariateSampler(double z2_log_coef) : z2_log_coef_(z2_log_coef) {
        Eigen::Matrix4d corr = Eigen::Matrix4d::Constant(0.3);
        corr.diagonal().setOnes();
        chol_ = corr.llt().matrixL();
    }

    Row draw(std::mt19937_64& gen) {
        Row r{};
        r.x[0] = 1.0;
        r.x[1] = exp_(gen);
        Eigen::Vector4d v;
        for (int k = 0; k < 4; ++k) v(k) = normal_(gen);
        v = chol_ * v;
        r.x[2] = v(0);
        r.x[3] = v(1) > 0.7 * v(0) ? 1.0 : 0.0;
        r.x[4] = v(2);
        r.x[5] = v(3);
        r.z[0] = normal_(gen);
        r.z[1] = z2_log_coef_ * std::log(r.x[1]) + normal_(gen);
        return r;
    }

    double normal(std::mt19937_64& gen) { return normal_(gen); }
    double uniform(std::mt19937_64& gen) { return unif_(gen); }

private:
    double z2_log_coef_;
    Eigen::Matrix4d chol_;
    std::exponential_distribution<double> exp_{1.0};
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

double mean_response(const ScenarioSpec& s, const Row& r, double beta_x) {
    const double sum_x = r.x[1] + r.x[2] + r.x[3] + r.x[4] + r.x[5] + r.x[1] * r.x[3];
    return s.beta_c + beta_x * sum_x + s.beta_z * (r.z[0] + r.z[1]) + s.beta_xz * r.x[2] * r.z[1];
}

/// Draws `n` rows. `offset_row(i)` says whether row i gets the offset on β_X.
template <class OffsetRow>
Dataset draw_rows(const ScenarioSpec& s, Eigen::Index n, double offset, std::mt19937_64& gen,
                  OffsetRow offset_row, std::vector<bool>* observed = nullptr) {
    CovariateSampler cov(s.z2_log_coef);
    Dataset::Columns c;
    c.x.resize(n, kXCols);
    c.z = MatrixXd(n, kZCols);
    c.y.resize(n);
    c.x_names = kXNames;
    c.z_names = kZNames;
    const bool two_outcomes = s.kind == ScenarioKind::surrogate || s.kind == ScenarioKind::missing_outcome;
    const bool treated = s.kind == ScenarioKind::cate;
    if (two_outcomes) c.y2 = VectorXd(n);
    if (treated) {
        c.a = VectorXd(n);
        c.propensity = VectorXd(n);
        c.propensity_x = VectorXd(n);
    }
    if (observed) observed->assign(static_cast<std::size_t>(n), true);

    const double rho = std::clamp(s.rho, -1.0, 1.0);
    const double rho_c = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (Eigen::Index i = 0; i < n; ++i) {
        const Row r = cov.draw(gen);
        for (Eigen::Index j = 0; j < kXCols; ++j) c.x(i, j) = r.x[j];
        for (Eigen::Index j = 0; j < kZCols; ++j) (*c.z)(i, j) = r.z[j];
        bool shifted = false;
        if (observed) {
            (*observed)[static_cast<std::size_t>(i)] = cov.uniform(gen) >= s.missing_rate;
            shifted = !(*observed)[static_cast<std::size_t>(i)] && offset_row(i);
        } else {
            shifted = offset_row(i);
        }
        const double bx = s.beta_x + (shifted ? offset : 0.0);

        switch (s.kind) {
            case ScenarioKind::linear:
            case ScenarioKind::missing_covariate:
                c.y(i) = mean_response(s, r, bx) + s.noise_sd * cov.normal(gen);
                break;
            case ScenarioKind::logistic:
                c.y(i) = cov.uniform(gen) < expit(mean_response(s, r, bx)) ? 1.0 : 0.0;
                break;
            case ScenarioKind::surrogate:
            case ScenarioKind::missing_outcome: {
                const double mu = mean_response(s, r, bx);
                const double e1 = cov.normal(gen);
                const double e2 = cov.normal(gen);
                c.y(i) = mu + s.sigma1 * e1;
                (*c.y2)(i) = mu + s.sigma2 * (rho * e1 + rho_c * e2);
                break;
            }
            case ScenarioKind::cate: {
                const auto& al = s.treat_alpha;
                const auto& t = s.tau;
                const double p = expit(al[0] + al[1] * r.x[1] + al[2] * r.z[0]);
                const double a = cov.uniform(gen) < p ? 1.0 : 0.0;
                const double base = s.beta_c + bx * (r.x[1] + r.x[2] + r.x[3] + r.x[4] + r.x[5]) +
                                    s.beta_z * (r.z[0] + r.z[1]);
                const double effect =
                    t[0] + t[1] * r.x[1] + t[2] * r.x[2] + t[3] * r.z[0] + t[4] * r.x[2] * r.z[1];
                c.y(i) = base + a * effect + s.noise_sd * cov.normal(gen);
                (*c.a)(i) = a;
                (*c.propensity)(i) = p;
                (*c.propensity_x)(i) = marginal_propensity(al[0], al[1], al[2], r.x[1]);
                break;
            }
        }
    }
    if (s.kind == ScenarioKind::missing_covariate && observed) {
        for (Eigen::Index i = 0; i < n; ++i)
            if (!(*observed)[static_cast<std::size_t>(i)])
                c.z->row(i).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    return Dataset(std::move(c));
}

bool same_term(const Term& a, const Term& b) {
    if (a.factors.size() != b.factors.size()) return false;
    for (std::size_t k = 0; k < a.factors.size(); ++k)
        if (a.factors[k].block != b.factors[k].block || a.factors[k].index != b.factors[k].index)
            return false;
    return true;
}

bool contains_term(const FeatureMap& m, const Term& t) {
    return std::any_of(m.terms().begin(), m.terms().end(), [&](const Term& u) { return same_term(u, t); });
}

bool is_missing_kind(ScenarioKind k) {
    return k == ScenarioKind::missing_outcome || k == ScenarioKind::missing_covariate;
}

std::vector<Eigen::Index> rows_where(const std::vector<bool>& flags, bool value) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < flags.size(); ++i)
        if (flags[i] == value) idx.push_back(static_cast<Eigen::Index>(i));
    return idx;
}

void check_split(std::size_t rows, Eigen::Index p, const char* which) {
    if (static_cast<Eigen::Index>(rows) < 2 * p)
        throw InsufficientDataError(
            fmt::format("{} split has {} rows; at least {} are needed", which, rows, 2 * p));
}

}  // namespace

std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::linear: return "linear";
        case ScenarioKind::logistic: return "logistic";
        case ScenarioKind::cate: return "cate";
        case ScenarioKind::surrogate: return "surrogate";
        case ScenarioKind::missing_outcome: return "missing_outcome";
        case ScenarioKind::missing_covariate: return "missing_covariate";
    }
    return "?";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
    for (auto k : {ScenarioKind::linear, ScenarioKind::logistic, ScenarioKind::cate, ScenarioKind::surrogate,
                   ScenarioKind::missing_outcome, ScenarioKind::missing_covariate})
        if (to_string(k) == s) return k;
    throw ConfigError(fmt::format("unknown scenario kind '{}'", s));
}

std::vector<double> ScenarioSpec::default_offsets() {
    std::vector<double> v;
    for (int k = 0; k <= 12; ++k) v.push_back(0.025 * k);
    return v;
}

void ScenarioSpec::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw ConfigError(fmt::format("scenario.{}: {}", field, why));
    };
    if (n_internal < 10) fail("n_internal", "must be at least 10");
    if (n_external < 10) fail("n_external", "must be at least 10");
    if (offsets.empty()) fail("offsets", "must not be empty");
    for (double o : offsets)
        if (!(o >= 0.0) || !std::isfinite(o)) fail("offsets", "entries must be finite and nonnegative");
    if (!(rho >= -1.0 && rho <= 1.0)) fail("rho", "must lie in [-1, 1]");
    for (double r : rho_grid)
        if (!(r >= -1.0 && r <= 1.0)) fail("rho_grid", "entries must lie in [-1, 1]");
    if (!(sigma1 > 0.0)) fail("sigma1", "must be positive");
    if (!(sigma2 > 0.0)) fail("sigma2", "must be positive");
    if (!(noise_sd > 0.0)) fail("noise_sd", "must be positive");
    if (!(missing_rate > 0.0 && missing_rate < 1.0)) fail("missing_rate", "must lie in (0, 1)");
    if (tau.size() != 5) fail("tau", "needs 5 entries");
    if (treat_alpha.size() != 3) fail("treat_alpha", "needs 3 entries");
    if (mc_replicates < 1) fail("mc_replicates", "must be at least 1");
    if (threads < 1) fail("threads", "must be at least 1");
    if (eval_n < 10) fail("eval_n", "must be at least 10");
    if (truth_n < 10) fail("truth_n", "must be at least 10");
    if (bootstrap_replicates < 1) fail("bootstrap_replicates", "must be at least 1");
    if (!(ci_level > 0.0 && ci_level < 1.0)) fail("ci_level", "must lie in (0, 1)");
}

std::pair<VectorXd, VectorXd> gauss_hermite_normal(int points) {
    if (points < 1) throw NumericError("gauss_hermite_normal: need at least one point");
    MatrixXd jac = MatrixXd::Zero(points, points);
    for (int k = 1; k < points; ++k) jac(k, k - 1) = jac(k - 1, k) = std::sqrt(static_cast<double>(k));
    const auto e = sym_eigen(SymMatrix(jac));
    VectorXd w = e.vectors.row(0).transpose().array().square();
    return {e.values, w / w.sum()};
}

double marginal_propensity(double a0, double a1, double a2, double x1) {
    static const auto rule = gauss_hermite_normal(40);
    double p = 0.0;
    for (Eigen::Index k = 0; k < rule.first.size(); ++k)
        p += rule.second(k) * expit(a0 + a1 * x1 + a2 * rule.first(k));
    return p;
}

GeneratedData generate(const ScenarioSpec& spec, double offset, std::uint64_t seed) {
    spec.validate();
    if (offset < 0.0) throw ConfigError("offset must be nonnegative");
    std::mt19937_64 gen_internal(mix_seed(seed ^ 0x1ULL));
    if (is_missing_kind(spec.kind)) {
        std::vector<bool> observed;
        Dataset all = draw_rows(spec, spec.n_internal, offset, gen_internal,
                                [](Eigen::Index) { return true; }, &observed);
        return {std::move(all), std::nullopt, std::move(observed)};
    }
    Dataset internal = draw_rows(spec, spec.n_internal, 0.0, gen_internal, [](Eigen::Index) { return false; });
    std::mt19937_64 gen_external(mix_seed(seed ^ 0x2ULL));
    Dataset external = draw_rows(spec, spec.n_external, offset, gen_external, [](Eigen::Index) { return true; });
    if (spec.kind == ScenarioKind::surrogate) {
        // The external study records only the secondary endpoint.
        Dataset::Columns c = external.columns();
        c.y = *c.y2;
        external = Dataset(std::move(c));
    }
    return {std::move(internal), std::move(external), {}};
}

Dataset generate_internal_law(const ScenarioSpec& spec, Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    return draw_rows(spec, n, 0.0, gen, [](Eigen::Index) { return false; });
}

ScenarioModels scenario_models(const ScenarioSpec& spec) {
    const FeatureMap full = FeatureMap::columns(kXCols, kZCols, true);
    const FeatureMap x_only = FeatureMap::columns(kXCols, 0, false);
    const FeatureMap external_x({Term::x(0), Term::x(1), Term::x(2), Term::x(4), Term::x(5)});
    auto all_coords = [](Eigen::Index q) {
        std::vector<Eigen::Index> v(static_cast<std::size_t>(q));
        for (Eigen::Index j = 0; j < q; ++j) v[static_cast<std::size_t>(j)] = j;
        return v;
    };

    ScenarioModels m{EquationFamily::linear(external_x), EquationFamily::linear(full),
                     Transformation::identity(external_x.width()), WeightMatrixSpec{}, {}, {}};
    switch (spec.kind) {
        case ScenarioKind::linear: break;
        case ScenarioKind::logistic:
            m.psi = EquationFamily::logistic(external_x);
            m.phi = EquationFamily::logistic(full);
            break;
        case ScenarioKind::surrogate:
            m.psi = EquationFamily::linear(external_x, Outcome::secondary);
            break;
        case ScenarioKind::missing_outcome:
            m.psi = EquationFamily::linear(x_only, Outcome::secondary);
            m.transform = Transformation::identity(x_only.width());
            break;
        case ScenarioKind::missing_covariate:
            m.psi = EquationFamily::linear(x_only);
            m.transform = Transformation::identity(x_only.width());
            break;
        case ScenarioKind::cate: {
            const FeatureMap effect({Term::x(0), Term::x(1), Term::x(2), Term::x(3), Term::x(4), Term::x(5),
                                     Term::z(0), Term::x(2) * Term::z(1)});
            m.phi = EquationFamily::wcls(full, effect, false);
            m.psi = EquationFamily::wcls(x_only, x_only, true);
            const auto part = m.psi.cate_partition();
            m.transform = Transformation::subset(m.psi.param_dim(), part.effect_indices());
            break;
        }
    }

    const Eigen::Index q = m.phi.param_dim();
    if (spec.kind == ScenarioKind::cate) {
        m.eval_coords = m.phi.cate_partition().effect_indices();
        m.loss = spec.loss.value_or(
            WeightMatrixSpec{WeightMatrixSpec::Kind::predictive_subset, m.eval_coords});
    } else {
        m.eval_coords = all_coords(q);
        m.loss = spec.loss.value_or(WeightMatrixSpec{WeightMatrixSpec::Kind::predictive, {}});
    }
    if (m.loss.kind == WeightMatrixSpec::Kind::predictive_subset && m.loss.subset.empty())
        m.loss.subset = m.eval_coords;

    m.external_param.assign(static_cast<std::size_t>(q), false);
    if (m.phi.id == FamilyId::wcls_cate) {
        const Eigen::Index g_width = m.phi.design.width();
        for (Eigen::Index j = 0; j < q; ++j) {
            m.external_param[static_cast<std::size_t>(j)] =
                j < g_width ? contains_term(m.psi.design, m.phi.design.terms()[static_cast<std::size_t>(j)])
                            : contains_term(m.psi.effect,
                                            m.phi.effect.terms()[static_cast<std::size_t>(j - g_width)]);
        }
    } else {
        for (Eigen::Index j = 0; j < q; ++j)
            m.external_param[static_cast<std::size_t>(j)] =
                contains_term(m.psi.design, m.phi.design.terms()[static_cast<std::size_t>(j)]);
    }
    return m;
}

VectorXd scenario_truth(const ScenarioSpec& spec, const ScenarioModels& models) {
    const Dataset big = generate_internal_law(spec, spec.truth_n, mix_seed(spec.base_seed ^ 0x7472757468ULL));
    VectorXd truth = solve(models.phi, big).params;
    if (spec.kind == ScenarioKind::cate) {
        // The effect block is known exactly: the fitted effect features span
        // the true treatment-effect function.
        const auto& t = spec.tau;
        VectorXd eff(8);
        eff << t[0], t[1], t[2], 0.0, 0.0, 0.0, t[3], t[4];
        const auto idx = models.phi.cate_partition().effect_indices();
        for (std::size_t k = 0; k < idx.size(); ++k) truth(idx[k]) = eff(static_cast<Eigen::Index>(k));
    }
    return truth;
}

namespace {

ReplicateRow evaluate_replicate(const ScenarioSpec& s, const ScenarioModels& m, const VectorXd& truth,
                                double offset, std::uint64_t seed) {
    ReplicateRow row;
    row.offset = offset;

    GeneratedData g = generate(s, offset, seed);
    std::optional<Dataset> internal;
    std::optional<ExternalSummary> ext;
    if (s.kind == ScenarioKind::missing_outcome) {
        FusionInputs in = missing_outcome_workflow(g.internal, g.observed, std::nullopt, m.psi.design,
                                                   m.phi.design);
        internal.emplace(std::move(in.internal));
        ext = std::move(in.external);
    } else if (s.kind == ScenarioKind::missing_covariate) {
        FusionInputs in = missing_covariate_workflow(g.internal, g.observed, m.psi.design, m.phi.design);
        internal.emplace(std::move(in.internal));
        ext = std::move(in.external);
    } else {
        ext = summarize_external(fit_model(m.psi, *g.external), m.transform);
        internal.emplace(std::move(g.internal));
    }

    const JointFit joint = fit_joint(m.psi, m.phi, *internal);
    const ConditionalResult cond = conditional_estimate(joint, *ext, m.transform);
    const SymMatrix a = build_A(m.loss, joint, *internal);
    const ShrinkageResult js = james_stein(cond, joint, a);
    const VectorXd est[3] = {cond.gamma_internal, cond.gamma_cond, js.gamma_js};
    row.js_weight = js.weight;
    row.correction = cond.gamma_cond - cond.gamma_internal;

    const Dataset eval = generate_internal_law(s, s.eval_n, mix_seed(seed ^ 0x3ULL));
    const bool effect_only = s.kind == ScenarioKind::cate;
    const MatrixXd design = predict_design(m.phi, eval, effect_only);
    const MatrixXd gram = design.transpose() * design / static_cast<double>(eval.n());
    const auto k = static_cast<Eigen::Index>(m.eval_coords.size());
    for (int e = 0; e < 3; ++e) {
        VectorXd d(k);
        for (Eigen::Index j = 0; j < k; ++j) {
            const auto c = m.eval_coords[static_cast<std::size_t>(j)];
            d(j) = est[e](c) - truth(c);
        }
        row.pmse[e] = d.dot(gram * d);
    }
    for (int e = 0; e < 3; ++e) row.rel_pmse[e] = row.pmse[e] / row.pmse[0];

    if (s.coverage) {
        BootstrapConfig cfg;
        cfg.replicates = s.bootstrap_replicates;
        cfg.base_seed = mix_seed(seed ^ 0x4ULL);
        cfg.ci_level = s.ci_level;
        const BootstrapOutput b = bootstrap_fuse(*internal, *ext, m.psi, m.phi, m.transform, m.loss, cfg);
        const EstimatorDraws* draws[3] = {&b.internal, &b.conditional, &b.js};
        row.covered.assign(3, std::vector<bool>(static_cast<std::size_t>(truth.size()), false));
        for (int e = 0; e < 3; ++e)
            for (Eigen::Index j = 0; j < truth.size(); ++j)
                row.covered[static_cast<std::size_t>(e)][static_cast<std::size_t>(j)] =
                    draws[e]->ci_lower(j) <= truth(j) && truth(j) <= draws[e]->ci_upper(j);
    }
    return row;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

ScenarioReport run_scenario(const ScenarioSpec& spec) {
    spec.validate();
    const ScenarioModels models = scenario_models(spec);

    struct Block {
        std::string label;
        ScenarioSpec spec;
    };
    std::vector<Block> blocks;
    if (spec.kind == ScenarioKind::surrogate && !spec.rho_grid.empty()) {
        for (double r : spec.rho_grid) {
            ScenarioSpec s = spec;
            s.rho = r;
            blocks.push_back({fmt::format("surrogate_rho{:.2f}", r), s});
        }
    } else {
        blocks.push_back({to_string(spec.kind), spec});
    }

    ScenarioReport report;
    report.truth = scenario_truth(spec, models);

    const std::size_t n_off = spec.offsets.size();
    const auto n_rep = static_cast<std::size_t>(spec.mc_replicates);
    const std::size_t per_block = n_off * n_rep;
    report.replicates.resize(blocks.size() * per_block);

    // Seeds depend on (offset index, replicate) only, so blocks that differ in
    // ρ share their random draws and compare as paired samples.
    parallel_for(report.replicates.size(), spec.threads, [&](std::size_t u) {
        const std::size_t b = u / per_block;
        const std::size_t o = (u % per_block) / n_rep;
        const std::size_t r = u % n_rep;
        const std::uint64_t seed = replicate_seed(spec.base_seed, o, r);
        ReplicateRow row;
        try {
            row = evaluate_replicate(blocks[b].spec, models, report.truth, spec.offsets[o], seed);
        } catch (const Error&) {
            row = ReplicateRow{};
            row.failed = true;
        }
        row.scenario = blocks[b].label;
        row.offset_index = o;
        row.offset = spec.offsets[o];
        row.replicate = static_cast<int>(r);
        report.replicates[u] = std::move(row);
    });

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (std::size_t o = 0; o < n_off; ++o) {
            std::vector<const ReplicateRow*> ok;
            int failed = 0;
            for (std::size_t r = 0; r < n_rep; ++r) {
                const ReplicateRow& row = report.replicates[b * per_block + o * n_rep + r];
                if (row.failed) ++failed;
                else ok.push_back(&row);
            }
            if (failed > kMaxFailedShare * static_cast<double>(n_rep))
                throw ScenarioDegenerateError(fmt::format("{} at offset {}: {} of {} replicates failed",
                                                          blocks[b].label, spec.offsets[o], failed, n_rep));
            std::vector<double> weights;
            for (const auto* row : ok) weights.push_back(row->js_weight);
            const double mean_w = mean_of(weights);

            for (int e = 0; e < 3; ++e) {
                SummaryRow s;
                s.scenario = blocks[b].label;
                s.offset = spec.offsets[o];
                s.estimator = kEstimatorNames[static_cast<std::size_t>(e)];
                std::vector<double> rel;
                for (const auto* row : ok) rel.push_back(row->rel_pmse[e]);
                s.rel_pmse_mean = mean_of(rel);
                s.rel_pmse_se = se_of(rel);
                s.mean_js_weight = mean_w;
                s.n_failed = failed;
                s.coverage_all = s.coverage_external_params = s.coverage_other_params = nan;
                if (spec.coverage && !ok.empty()) {
                    double all = 0, ext = 0, other = 0;
                    double n_all = 0, n_ext = 0, n_other = 0;
                    for (const auto* row : ok) {
                        const auto& cov = row->covered[static_cast<std::size_t>(e)];
                        for (std::size_t j = 0; j < cov.size(); ++j) {
                            const double hit = cov[j] ? 1.0 : 0.0;
                            all += hit;
                            n_all += 1;
                            if (models.external_param[j]) {
                                ext += hit;
                                n_ext += 1;
                            } else {
                                other += hit;
                                n_other += 1;
                            }
                        }
                    }
                    s.coverage_all = all / n_all;
                    s.coverage_external_params = n_ext > 0 ? ext / n_ext : nan;
                    s.coverage_other_params = n_other > 0 ? other / n_other : nan;
                }
                report.rows.push_back(std::move(s));
            }
        }
    }
    return report;
}

FusionInputs missing_outcome_workflow(const Dataset& data, const std::vector<bool>& outcome_observed,
                                      const std::optional<VectorXd>& predictive_model,
                                      const FeatureMap& psi_design, const FeatureMap& phi_design) {
    if (outcome_observed.size() != static_cast<std::size_t>(data.n()))
        throw SchemaError(fmt::format("missingness indicator has {} entries, dataset has {} rows",
                                      outcome_observed.size(), data.n()));
    Dataset with_secondary = data;
    if (predictive_model) {
        const VectorXd& b = *predictive_model;
        Dataset::Columns c = data.columns();
        const Eigen::Index xw = data.x().cols();
        const Eigen::Index zw = data.has_z() ? data.z().cols() : 0;
        if (b.size() == xw) {
            c.y2 = data.x() * b;
        } else if (zw > 0 && b.size() == xw + zw) {
            c.y2 = data.x() * b.head(xw) + data.z() * b.tail(zw);
        } else {
            throw SchemaError(fmt::format("predictive model has {} coefficients; expected {} or {}",
                                          b.size(), xw, xw + zw));
        }
        with_secondary = Dataset(std::move(c));
    } else if (!data.has_y2()) {
        throw SchemaError("missing_outcome_workflow needs a y2 column or a predictive model");
    }

    FusionInputs in{with_secondary, {}, EquationFamily::linear(psi_design, Outcome::secondary),
                    EquationFamily::linear(phi_design), Transformation::identity(psi_design.width())};
    const auto obs = rows_where(outcome_observed, true);
    const auto mis = rows_where(outcome_observed, false);
    check_split(mis.size(), in.psi.param_dim(), "external (outcome missing)");
    check_split(obs.size(), std::max(in.psi.param_dim(), in.phi.param_dim()), "internal (outcome observed)");

    const Dataset external = with_secondary.select_rows(mis);
    in.external = summarize_external(fit_model(in.psi, external), in.transform);
    in.internal = with_secondary.select_rows(obs);
    return in;
}

FusionInputs missing_covariate_workflow(const Dataset& data, const std::vector<bool>& z_observed,
                                        const FeatureMap& psi_design, const FeatureMap& phi_design) {
    if (z_observed.size() != static_cast<std::size_t>(data.n()))
        throw SchemaError(fmt::format("missingness indicator has {} entries, dataset has {} rows",
                                      z_observed.size(), data.n()));
    if (psi_design.uses_z()) throw SchemaError("the external model cannot use z when z is missing");

    FusionInputs in{data, {}, EquationFamily::linear(psi_design), EquationFamily::linear(phi_design),
                    Transformation::identity(psi_design.width())};
    const auto obs = rows_where(z_observed, true);
    const auto mis = rows_where(z_observed, false);
    check_split(mis.size(), in.psi.param_dim(), "external (z missing)");
    check_split(obs.size(), std::max(in.psi.param_dim(), in.phi.param_dim()), "internal (z observed)");

    in.external = summarize_external(fit_model(in.psi, data.select_rows(mis)), in.transform);
    in.internal = data.select_rows(obs);
    return in;
}

}  // namespace mfuse
