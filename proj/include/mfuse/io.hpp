#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfuse/data.hpp"
#include "mfuse/fusion.hpp"
#include "mfuse/scenarios.hpp"

namespace mfuse {

/// Numeric CSV with a header row.
struct CsvTable {
    std::vector<std::string> header;
    MatrixXd values;

    Eigen::Index column(const std::string& name) const;  // SchemaError when absent
};

/// Parses numeric CSV. Errors name the offending line (1-based, header = 1).
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

/// Which CSV columns play which role.
struct ColumnRoles {
    std::string outcome;
    std::string outcome2;
    std::vector<std::string> x;
    std::vector<std::string> z;
    std::string treatment;
    std::string propensity;
    std::string propensity_x;
    std::string weights;
    bool intercept = true;  // prepend a column of ones to x
};

Dataset dataset_from_table(const CsvTable& table, const ColumnRoles& roles);

/// `{:.17g}`; enough digits for an exact round trip.
std::string format_real(double v);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// Structured text with keys theta, cov (row-major), n, family, transform,
/// transform_indices.
std::string external_summary_to_string(const ExternalSummary& s);
ExternalSummary external_summary_from_string(const std::string& text);
void write_external_summary(const std::string& path, const ExternalSummary& s);
ExternalSummary read_external_summary(const std::string& path);

std::string scenario_report_csv(const ScenarioReport& report);

/// Line plot of one metric against offset, one line per estimator, one panel
/// per scenario label. `metric` is "rel_pmse" or "coverage".
std::string scenario_svg(const ScenarioReport& report, const std::string& metric);

}  // namespace mfuse
