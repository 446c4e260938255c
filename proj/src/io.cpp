#include "mfuse/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "mfuse/errors.hpp"

namespace mfuse {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) out.push_back(trim(f));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& s, std::size_t line, const std::string& column) {
    if (s == "NA" || s == "nan" || s == "NaN" || s.empty()) return std::nan("");
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw SchemaError(fmt::format("line {}: column '{}' holds non-numeric value '{}'", line, column, s));
    return v;
}

VectorXd column_of(const CsvTable& t, const std::string& name) { return t.values.col(t.column(name)); }

template <class T>
T yaml_get(const YAML::Node& root, const char* key) {
    const YAML::Node n = root[key];
    if (!n) throw SchemaError(fmt::format("external summary: missing key '{}'", key));
    try {
        return n.as<T>();
    } catch (const YAML::Exception& e) {
        throw SchemaError(fmt::format("external summary: bad value for '{}': {}", key, e.what()));
    }
}

std::string csv_field(double v) { return std::isnan(v) ? "NA" : format_real(v); }

}  // namespace

Eigen::Index CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError(fmt::format("CSV has no column '{}'", name));
    return it - header.begin();
}

CsvTable parse_csv(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    CsvTable t;
    std::vector<std::vector<double>> rows;
    while (std::getline(ss, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            for (const auto& h : t.header)
                if (h.empty()) throw SchemaError(fmt::format("line {}: empty column name", line_no));
            continue;
        }
        if (fields.size() != t.header.size())
            throw SchemaError(fmt::format("line {}: expected {} fields, found {}", line_no, t.header.size(),
                                          fields.size()));
        std::vector<double> row;
        for (std::size_t k = 0; k < fields.size(); ++k) row.push_back(parse_number(fields[k], line_no, t.header[k]));
        rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw SchemaError("CSV is empty");
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.header.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return t;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_text(path)); }

Dataset dataset_from_table(const CsvTable& table, const ColumnRoles& roles) {
    if (roles.outcome.empty()) throw SchemaError("no outcome column declared");
    const Eigen::Index n = table.values.rows();
    Dataset::Columns c;
    c.y = column_of(table, roles.outcome);
    const auto xw = static_cast<Eigen::Index>(roles.x.size()) + (roles.intercept ? 1 : 0);
    if (xw == 0) throw SchemaError("no x columns declared");
    c.x.resize(n, xw);
    Eigen::Index k = 0;
    if (roles.intercept) {
        c.x.col(k++).setOnes();
        c.x_names.push_back("intercept");
    }
    for (const auto& name : roles.x) {
        c.x.col(k++) = column_of(table, name);
        c.x_names.push_back(name);
    }
    if (!roles.z.empty()) {
        c.z = MatrixXd(n, static_cast<Eigen::Index>(roles.z.size()));
        for (std::size_t j = 0; j < roles.z.size(); ++j) c.z->col(static_cast<Eigen::Index>(j)) = column_of(table, roles.z[j]);
        c.z_names = roles.z;
    }
    if (!roles.outcome2.empty()) c.y2 = column_of(table, roles.outcome2);
    if (!roles.treatment.empty()) c.a = column_of(table, roles.treatment);
    if (!roles.propensity.empty()) c.propensity = column_of(table, roles.propensity);
    if (!roles.propensity_x.empty()) c.propensity_x = column_of(table, roles.propensity_x);
    if (!roles.weights.empty()) c.obs_weights = column_of(table, roles.weights);
    return Dataset(std::move(c));
}

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError(fmt::format("cannot open '{}' for writing", path));
    out << text;
    if (!out) throw ConfigError(fmt::format("failed writing '{}'", path));
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot open '{}'", path));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string external_summary_to_string(const ExternalSummary& s) {
    YAML::Emitter e;
    auto seq = [&](const auto& values) {
        e << YAML::Flow << YAML::BeginSeq;
        for (auto v : values) e << format_real(v);
        e << YAML::EndSeq;
    };
    const MatrixXd& cov = s.cov_theta_hat.matrix();
    std::vector<double> theta(s.theta_hat.data(), s.theta_hat.data() + s.theta_hat.size());
    std::vector<double> cov_rows;
    for (Eigen::Index i = 0; i < cov.rows(); ++i)
        for (Eigen::Index j = 0; j < cov.cols(); ++j) cov_rows.push_back(cov(i, j));

    e << YAML::BeginMap;
    e << YAML::Key << "theta" << YAML::Value;
    seq(theta);
    e << YAML::Key << "cov" << YAML::Value;
    seq(cov_rows);
    e << YAML::Key << "n" << YAML::Value << s.n_external;
    e << YAML::Key << "family" << YAML::Value << to_string(s.family);
    e << YAML::Key << "transform" << YAML::Value << s.transform_kind;
    e << YAML::Key << "transform_indices" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (auto i : s.transform_indices) e << i;
    e << YAML::EndSeq;
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

ExternalSummary external_summary_from_string(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw SchemaError(fmt::format("external summary: {}", e.what()));
    }
    if (!root.IsMap()) throw SchemaError("external summary must be a key-value map");
    const auto theta = yaml_get<std::vector<double>>(root, "theta");
    const auto cov = yaml_get<std::vector<double>>(root, "cov");
    const auto p = theta.size();
    if (cov.size() != p * p)
        throw SchemaError(fmt::format("external summary: cov has {} entries, expected {}", cov.size(), p * p));
    ExternalSummary s;
    s.theta_hat = Eigen::Map<const VectorXd>(theta.data(), static_cast<Eigen::Index>(p));
    MatrixXd m(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cov[i * p + j];
    s.cov_theta_hat = SymMatrix(m);
    s.n_external = yaml_get<Eigen::Index>(root, "n");
    s.family = family_from_string(yaml_get<std::string>(root, "family"));
    s.transform_kind = root["transform"] ? yaml_get<std::string>(root, "transform") : "identity";
    if (root["transform_indices"]) s.transform_indices = yaml_get<std::vector<Eigen::Index>>(root, "transform_indices");
    s.validate();
    (void)s.transformation();
    return s;
}

void write_external_summary(const std::string& path, const ExternalSummary& s) {
    write_text(path, external_summary_to_string(s));
}

ExternalSummary read_external_summary(const std::string& path) {
    return external_summary_from_string(read_text(path));
}

std::string scenario_report_csv(const ScenarioReport& report) {
    std::string out =
        "scenario,offset,estimator,rel_pmse_mean,rel_pmse_se,coverage_all,coverage_external_params,"
        "coverage_other_params,mean_js_weight,n_failed\n";
    for (const auto& r : report.rows)
        out += fmt::format("{},{:.3f},{},{},{},{},{},{},{},{}\n", r.scenario, r.offset, r.estimator,
                           csv_field(r.rel_pmse_mean), csv_field(r.rel_pmse_se), csv_field(r.coverage_all),
                           csv_field(r.coverage_external_params), csv_field(r.coverage_other_params),
                           csv_field(r.mean_js_weight), r.n_failed);
    return out;
}

std::string scenario_svg(const ScenarioReport& report, const std::string& metric) {
    if (metric != "rel_pmse" && metric != "coverage")
        throw ConfigError(fmt::format("unknown plot metric '{}'", metric));
    std::vector<std::string> labels;
    for (const auto& r : report.rows)
        if (std::find(labels.begin(), labels.end(), r.scenario) == labels.end()) labels.push_back(r.scenario);

    constexpr double kW = 360, kH = 260, kPad = 45;
    const std::map<std::string, std::string> colors = {
        {"internal", "#444444"}, {"conditional", "#1f77b4"}, {"js", "#d62728"}};
    auto value = [&](const SummaryRow& r) { return metric == "rel_pmse" ? r.rel_pmse_mean : r.coverage_all; };

    std::string body;
    for (std::size_t p = 0; p < labels.size(); ++p) {
        double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
        for (const auto& r : report.rows) {
            if (r.scenario != labels[p] || std::isnan(value(r))) continue;
            x_lo = std::min(x_lo, r.offset);
            x_hi = std::max(x_hi, r.offset);
            y_lo = std::min(y_lo, value(r));
            y_hi = std::max(y_hi, value(r));
        }
        if (x_lo > x_hi) continue;
        if (x_hi == x_lo) x_hi = x_lo + 1;
        if (y_hi - y_lo < 1e-9) {
            y_lo -= 0.05;
            y_hi += 0.05;
        }
        const double ox = static_cast<double>(p) * kW;
        auto px = [&](double x) { return ox + kPad + (x - x_lo) / (x_hi - x_lo) * (kW - 2 * kPad); };
        auto py = [&](double y) { return kH - kPad - (y - y_lo) / (y_hi - y_lo) * (kH - 2 * kPad); };

        body += fmt::format(R"(<text x="{:.1f}" y="20" font-size="13">{}</text>)" "\n", ox + kPad, labels[p]);
        body += fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="none" stroke="#999"/>)" "\n",
                            ox + kPad, kPad, kW - 2 * kPad, kH - 2 * kPad);
        body += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="10">{:.3g}</text>)" "\n", ox + 2, py(y_lo), y_lo);
        body += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="10">{:.3g}</text>)" "\n", ox + 2, py(y_hi), y_hi);
        body += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="10">{:.3g}</text>)" "\n", px(x_lo), kH - kPad + 14, x_lo);
        body += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="10">{:.3g}</text>)" "\n", px(x_hi) - 20, kH - kPad + 14, x_hi);
        for (const auto& [name, color] : colors) {
            std::string pts;
            for (const auto& r : report.rows)
                if (r.scenario == labels[p] && r.estimator == name && !std::isnan(value(r)))
                    pts += fmt::format("{:.1f},{:.1f} ", px(r.offset), py(value(r)));
            if (!pts.empty())
                body += fmt::format(R"(<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>)" "\n", pts, color);
        }
    }
    double ly = kH - 12;
    std::string legend;
    double lx = kPad;
    for (const auto& name : kEstimatorNames) {
        legend += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="11" fill="{}">{}</text>)" "\n", lx, ly,
                              colors.at(name), name);
        lx += 90;
    }
    const double width = std::max<double>(1, static_cast<double>(labels.size())) * kW;
    return fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{:.0f}" height="{:.0f}">)" "\n{}{}</svg>\n",
                       width, kH, body, legend);
}

}  // namespace mfuse
