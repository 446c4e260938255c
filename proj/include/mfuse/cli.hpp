#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mfuse/bootstrap.hpp"
#include "mfuse/data.hpp"
#include "mfuse/equations.hpp"
#include "mfuse/fusion.hpp"
#include "mfuse/io.hpp"
#include "mfuse/scenarios.hpp"
#include "mfuse/shrinkage.hpp"

namespace mfuse {

/// Textual declaration of an estimating equation.
struct ModelDecl {
    std::string family = "linear";
    std::string design;  // empty: every x column (φ also takes every z column)
    std::string effect;  // wcls / lrr effect features, or the z-block
    std::string outcome = "primary";
    bool marginal_propensity = false;
};

struct RunConfig {
    std::string command;  // fit, fuse, bootstrap-ci, simulate
    std::string internal_data;
    std::string external_summary;
    ColumnRoles columns;
    /// Column flagging rows with the outcome (missing_kind = outcome) or z
    /// (missing_kind = covariate) observed; when set, fuse and bootstrap-ci
    /// build the external summary from the unobserved rows.
    std::string missing_indicator;
    std::string missing_kind = "outcome";
    ModelDecl psi;
    ModelDecl phi;
    std::string transform = "identity";
    std::vector<Eigen::Index> transform_indices;
    std::string loss = "pmse";
    std::vector<Eigen::Index> loss_subset;
    BootstrapConfig bootstrap;
    ScenarioSpec scenario;
    bool plots = false;
    std::string output_dir = ".";
};

RunConfig parse_config(const std::string& yaml_text, const std::string& command);
RunConfig load_config(const std::string& path, const std::string& command);

EquationFamily build_family(const ModelDecl& decl, const Dataset& data, bool internal_model);
Dataset load_internal(const RunConfig& cfg);

struct FuseOutput {
    ConditionalResult cond;
    ShrinkageResult js;
};

/// Pipelines behind the subcommands; each writes its CSV into output_dir.
ExternalSummary run_fit(const RunConfig& cfg);
FuseOutput run_fuse(const RunConfig& cfg);
BootstrapOutput run_bootstrap(const RunConfig& cfg);
ScenarioReport run_simulate(const RunConfig& cfg);

/// Dispatches on cfg.command.
void run(const RunConfig& cfg);

std::string fusion_csv(const FuseOutput& out);
std::string bootstrap_csv(const BootstrapOutput& out);

inline constexpr const char* kParamsFile = "params.csv";
inline constexpr const char* kCovarianceFile = "covariance.csv";
inline constexpr const char* kSummaryFile = "external_summary.yaml";
inline constexpr const char* kFusionFile = "fusion.csv";
inline constexpr const char* kBootstrapFile = "bootstrap_ci.csv";
inline constexpr const char* kSimulationFile = "simulation.csv";
inline constexpr const char* kReplicatesFile = "simulation_replicates.csv";

}  // namespace mfuse
