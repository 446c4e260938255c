#include "mfuse/cli.hpp"

#include <cmath>
#include <filesystem>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "mfuse/errors.hpp"
#include "mfuse/sandwich.hpp"

namespace mfuse {

namespace {

/// Typed lookups that report the dotted field path on failure.
class ConfigReader {
public:
    explicit ConfigReader(YAML::Node root) : root_(std::move(root)) {}

    YAML::Node node(const std::string& path) const {
        YAML::Node cur;
        cur.reset(root_);
        std::size_t start = 0;
        while (true) {
            const auto dot = path.find('.', start);
            const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (!cur.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
            const YAML::Node next = static_cast<const YAML::Node&>(cur)[key];
            if (!next) return YAML::Node(YAML::NodeType::Undefined);
            cur.reset(next);
            if (dot == std::string::npos) return cur;
            start = dot + 1;
        }
    }

    bool has(const std::string& path) const {
        const YAML::Node n = node(path);
        return n.IsDefined() && !n.IsNull();
    }

    template <class T>
    void read(const std::string& path, T& out) const {
        if (!has(path)) return;
        try {
            out = node(path).as<T>();
        } catch (const YAML::Exception&) {
            throw ConfigError(fmt::format("{}: invalid value", path));
        }
    }

    template <class T>
    T require(const std::string& path) const {
        if (!has(path)) throw ConfigError(fmt::format("{}: required field is missing", path));
        T out{};
        read(path, out);
        return out;
    }

private:
    YAML::Node root_;
};

void read_model(const ConfigReader& r, const std::string& base, ModelDecl& m) {
    r.read(base + ".family", m.family);
    r.read(base + ".design", m.design);
    r.read(base + ".effect", m.effect);
    r.read(base + ".outcome", m.outcome);
    r.read(base + ".marginal_propensity", m.marginal_propensity);
    if (m.outcome != "primary" && m.outcome != "secondary")
        throw ConfigError(fmt::format("{}.outcome: expected 'primary' or 'secondary'", base));
}

void read_scenario(const ConfigReader& r, ScenarioSpec& s) {
    std::string kind = to_string(s.kind);
    r.read("scenario.kind", kind);
    s.kind = scenario_kind_from_string(kind);
    r.read("scenario.n_internal", s.n_internal);
    r.read("scenario.n_external", s.n_external);
    r.read("scenario.beta_c", s.beta_c);
    r.read("scenario.beta_x", s.beta_x);
    r.read("scenario.beta_z", s.beta_z);
    r.read("scenario.beta_xz", s.beta_xz);
    r.read("scenario.z2_log_coef", s.z2_log_coef);
    r.read("scenario.noise_sd", s.noise_sd);
    r.read("scenario.tau", s.tau);
    r.read("scenario.treat_alpha", s.treat_alpha);
    r.read("scenario.offsets", s.offsets);
    r.read("scenario.rho_grid", s.rho_grid);
    r.read("scenario.rho", s.rho);
    r.read("scenario.sigma1", s.sigma1);
    r.read("scenario.sigma2", s.sigma2);
    r.read("scenario.missing_rate", s.missing_rate);
    r.read("scenario.mc_replicates", s.mc_replicates);
    r.read("scenario.seed", s.base_seed);
    r.read("scenario.threads", s.threads);
    r.read("scenario.eval_n", s.eval_n);
    r.read("scenario.truth_n", s.truth_n);
    r.read("scenario.coverage", s.coverage);
    r.read("scenario.bootstrap_replicates", s.bootstrap_replicates);
    r.read("scenario.ci_level", s.ci_level);
    if (r.has("scenario.loss")) {
        std::vector<Eigen::Index> subset;
        r.read("scenario.loss_subset", subset);
        s.loss = WeightMatrixSpec::from_string(r.require<std::string>("scenario.loss"), subset);
    }
}

std::vector<bool> indicator_column(const CsvTable& t, const std::string& name) {
    const VectorXd col = t.values.col(t.column(name));
    std::vector<bool> out(static_cast<std::size_t>(col.size()));
    for (Eigen::Index i = 0; i < col.size(); ++i) {
        if (std::isnan(col(i))) throw SchemaError(fmt::format("indicator column '{}' has a missing value", name));
        out[static_cast<std::size_t>(i)] = col(i) != 0.0;
    }
    return out;
}

std::filesystem::path output_path(const RunConfig& cfg, const char* file) {
    std::filesystem::create_directories(cfg.output_dir);
    return std::filesystem::path(cfg.output_dir) / file;
}

struct Pipeline {
    Dataset internal;
    ExternalSummary external;
    EquationFamily psi;
    EquationFamily phi;
    Transformation transform;
    WeightMatrixSpec loss;
};

Pipeline build_pipeline(const RunConfig& cfg) {
    const CsvTable table = read_csv(cfg.internal_data);
    const Dataset data = dataset_from_table(table, cfg.columns);
    std::optional<FusionInputs> in;
    if (!cfg.missing_indicator.empty()) {
        const auto observed = indicator_column(table, cfg.missing_indicator);
        const EquationFamily psi = build_family(cfg.psi, data, false);
        const EquationFamily phi = build_family(cfg.phi, data, true);
        if (cfg.missing_kind == "outcome")
            in = missing_outcome_workflow(data, observed, std::nullopt, psi.design, phi.design);
        else if (cfg.missing_kind == "covariate")
            in = missing_covariate_workflow(data, observed, psi.design, phi.design);
        else
            throw ConfigError("missing.kind: expected 'outcome' or 'covariate'");
    } else {
        if (cfg.external_summary.empty()) throw ConfigError("data.external_summary: required field is missing");
        const EquationFamily psi = build_family(cfg.psi, data, false);
        in = FusionInputs{data, read_external_summary(cfg.external_summary), psi, build_family(cfg.phi, data, true),
                          Transformation::from_declaration(cfg.transform, psi.param_dim(), cfg.transform_indices)};
    }
    WeightMatrixSpec loss = WeightMatrixSpec::from_string(cfg.loss, cfg.loss_subset);
    if (loss.kind == WeightMatrixSpec::Kind::predictive_subset && loss.subset.empty()) {
        if (in->phi.id != FamilyId::wcls_cate && in->phi.id != FamilyId::log_relative_risk)
            throw ConfigError("loss.subset: required unless φ is a treatment-effect family");
        loss.subset = in->phi.cate_partition().effect_indices();
    }
    return {std::move(in->internal), std::move(in->external), std::move(in->psi), std::move(in->phi),
            std::move(in->transform), std::move(loss)};
}

}  // namespace

RunConfig parse_config(const std::string& yaml_text, const std::string& command) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(fmt::format("config: {}", e.what()));
    }
    if (!root.IsMap() && !root.IsNull()) throw ConfigError("config: expected a key-value map at top level");
    const ConfigReader r(root);

    RunConfig cfg;
    cfg.command = command;
    if (command != "fit" && command != "fuse" && command != "bootstrap-ci" && command != "simulate")
        throw ConfigError(fmt::format("command: unknown subcommand '{}'", command));

    r.read("output", cfg.output_dir);
    r.read("plots", cfg.plots);
    if (command != "simulate") {
        cfg.internal_data = r.require<std::string>("data.internal");
        r.read("data.external_summary", cfg.external_summary);
        cfg.columns.outcome = r.require<std::string>("columns.outcome");
        r.read("columns.outcome2", cfg.columns.outcome2);
        r.read("columns.x", cfg.columns.x);
        r.read("columns.z", cfg.columns.z);
        r.read("columns.treatment", cfg.columns.treatment);
        r.read("columns.propensity", cfg.columns.propensity);
        r.read("columns.propensity_x", cfg.columns.propensity_x);
        r.read("columns.weights", cfg.columns.weights);
        r.read("columns.intercept", cfg.columns.intercept);
        r.read("missing.indicator", cfg.missing_indicator);
        r.read("missing.kind", cfg.missing_kind);
        read_model(r, "model.psi", cfg.psi);
        read_model(r, "model.phi", cfg.phi);
        r.read("transform.kind", cfg.transform);
        r.read("transform.indices", cfg.transform_indices);
        r.read("loss.kind", cfg.loss);
        r.read("loss.subset", cfg.loss_subset);
        (void)WeightMatrixSpec::from_string(cfg.loss, cfg.loss_subset);
    }
    r.read("bootstrap.replicates", cfg.bootstrap.replicates);
    r.read("bootstrap.seed", cfg.bootstrap.base_seed);
    r.read("bootstrap.ci_level", cfg.bootstrap.ci_level);
    r.read("bootstrap.threads", cfg.bootstrap.threads);
    if (command == "simulate") read_scenario(r, cfg.scenario);

    if (r.has("seed")) {
        const auto seed = r.require<std::uint64_t>("seed");
        cfg.bootstrap.base_seed = seed;
        cfg.scenario.base_seed = seed;
    }
    if (r.has("threads")) {
        const int threads = r.require<int>("threads");
        cfg.bootstrap.threads = threads;
        cfg.scenario.threads = threads;
    }
    if (cfg.bootstrap.threads < 1) throw ConfigError("bootstrap.threads: must be at least 1");
    cfg.bootstrap.validate();
    if (command == "simulate") cfg.scenario.validate();
    return cfg;
}

RunConfig load_config(const std::string& path, const std::string& command) {
    return parse_config(read_text(path), command);
}

EquationFamily build_family(const ModelDecl& decl, const Dataset& data, bool internal_model) {
    const FamilyId id = family_from_string(decl.family);
    const auto& xn = data.x_names();
    const auto& zn = data.z_names();
    const Eigen::Index zw = data.has_z() ? data.z().cols() : 0;
    auto parse_or = [&](const std::string& spec, FeatureMap fallback) {
        return spec.empty() ? std::move(fallback) : FeatureMap::parse(spec, xn, zn);
    };
    const FeatureMap design = parse_or(decl.design, FeatureMap::columns(data.x().cols(), zw, internal_model));
    const Outcome outcome = decl.outcome == "secondary" ? Outcome::secondary : Outcome::primary;
    switch (id) {
        case FamilyId::linear: return EquationFamily::linear(design, outcome);
        case FamilyId::glm_logistic: return EquationFamily::logistic(design, outcome);
        case FamilyId::glm_poisson: return EquationFamily::poisson(design, outcome);
        case FamilyId::wcls_cate:
            return EquationFamily::wcls(design, parse_or(decl.effect, design), decl.marginal_propensity);
        case FamilyId::log_relative_risk:
            return EquationFamily::log_relative_risk(design, parse_or(decl.effect, design),
                                                     decl.marginal_propensity);
        case FamilyId::surrogate_stack: return EquationFamily::surrogate_stack(design);
        case FamilyId::linear_orthogonal: {
            const FeatureMap x_block = parse_or(decl.design, FeatureMap::columns(data.x().cols(), 0, false));
            return EquationFamily::linear_orthogonal(x_block,
                                                     parse_or(decl.effect, FeatureMap::columns(0, zw, true)));
        }
    }
    throw ConfigError(fmt::format("model.family: unsupported family '{}'", decl.family));
}

Dataset load_internal(const RunConfig& cfg) { return dataset_from_table(read_csv(cfg.internal_data), cfg.columns); }

ExternalSummary run_fit(const RunConfig& cfg) {
    const Dataset data = load_internal(cfg);
    const EquationFamily fam = build_family(cfg.psi, data, false);
    const FittedModel fit = fit_model(fam, data);
    const Transformation t = Transformation::from_declaration(cfg.transform, fam.param_dim(), cfg.transform_indices);
    const ExternalSummary summary = summarize_external(fit, t);

    std::string params = "coordinate,estimate,std_error\n";
    for (Eigen::Index j = 0; j < fit.params.size(); ++j)
        params += fmt::format("{},{},{}\n", j, format_real(fit.params(j)),
                              format_real(std::sqrt(fit.sigma_estimate(j, j))));
    std::string cov;
    for (Eigen::Index i = 0; i < fit.params.size(); ++i) {
        for (Eigen::Index j = 0; j < fit.params.size(); ++j)
            cov += (j ? "," : "") + format_real(fit.sigma_estimate(i, j));
        cov += "\n";
    }
    write_text(output_path(cfg, kParamsFile), params);
    write_text(output_path(cfg, kCovarianceFile), cov);
    write_external_summary(output_path(cfg, kSummaryFile), summary);
    return summary;
}

std::string fusion_csv(const FuseOutput& out) {
    std::string s = "coordinate,internal,conditional,js,weight,tau_star,d_ratio\n";
    for (Eigen::Index j = 0; j < out.cond.gamma_internal.size(); ++j)
        s += fmt::format("{},{},{},{},{},{},{}\n", j, format_real(out.cond.gamma_internal(j)),
                         format_real(out.cond.gamma_cond(j)), format_real(out.js.gamma_js(j)),
                         format_real(out.js.weight), format_real(out.js.tau_star), format_real(out.js.d_ratio));
    return s;
}

FuseOutput run_fuse(const RunConfig& cfg) {
    const Pipeline p = build_pipeline(cfg);
    const JointFit joint = fit_joint(p.psi, p.phi, p.internal);
    FuseOutput out{conditional_estimate(joint, p.external, p.transform), {}};
    out.js = james_stein(out.cond, joint, build_A(p.loss, joint, p.internal));
    write_text(output_path(cfg, kFusionFile), fusion_csv(out));
    return out;
}

std::string bootstrap_csv(const BootstrapOutput& out) {
    std::string s = "estimator,coordinate,point,lower,upper,n_failed\n";
    const EstimatorDraws* draws[3] = {&out.internal, &out.conditional, &out.js};
    for (int e = 0; e < 3; ++e)
        for (Eigen::Index j = 0; j < draws[e]->point.size(); ++j)
            s += fmt::format("{},{},{},{},{},{}\n", kEstimatorNames[static_cast<std::size_t>(e)], j,
                             format_real(draws[e]->point(j)), format_real(draws[e]->ci_lower(j)),
                             format_real(draws[e]->ci_upper(j)), out.n_failed);
    return s;
}

BootstrapOutput run_bootstrap(const RunConfig& cfg) {
    const Pipeline p = build_pipeline(cfg);
    BootstrapOutput out = bootstrap_fuse(p.internal, p.external, p.psi, p.phi, p.transform, p.loss, cfg.bootstrap);
    write_text(output_path(cfg, kBootstrapFile), bootstrap_csv(out));
    return out;
}

ScenarioReport run_simulate(const RunConfig& cfg) {
    ScenarioReport report = run_scenario(cfg.scenario);
    write_text(output_path(cfg, kSimulationFile), scenario_report_csv(report));

    std::string raw = "scenario,offset,replicate,failed,pmse_internal,pmse_conditional,pmse_js,js_weight\n";
    for (const auto& r : report.replicates)
        raw += fmt::format("{},{:.3f},{},{},{},{},{},{}\n", r.scenario, r.offset, r.replicate, r.failed ? 1 : 0,
                           format_real(r.pmse[0]), format_real(r.pmse[1]), format_real(r.pmse[2]),
                           format_real(r.js_weight));
    write_text(output_path(cfg, kReplicatesFile), raw);

    if (cfg.plots) {
        write_text(output_path(cfg, "rel_pmse.svg"), scenario_svg(report, "rel_pmse"));
        if (cfg.scenario.coverage) write_text(output_path(cfg, "coverage.svg"), scenario_svg(report, "coverage"));
    }
    return report;
}

void run(const RunConfig& cfg) {
    if (cfg.command == "fit") run_fit(cfg);
    else if (cfg.command == "fuse") run_fuse(cfg);
    else if (cfg.command == "bootstrap-ci") run_bootstrap(cfg);
    else if (cfg.command == "simulate") run_simulate(cfg);
    else throw ConfigError(fmt::format("command: unknown subcommand '{}'", cfg.command));
}

}  // namespace mfuse
