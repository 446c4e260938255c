#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include <fmt/format.h>

#include "mfuse/cli.hpp"
#include "mfuse/errors.hpp"
#include "mfuse/io.hpp"
#include "oracles.hpp"

using namespace mfuse;
using Eigen::Index;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mfuse_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

void write_dataset(const Dataset& d, const fs::path& path) {
    std::string s = "y,x1,x2,z1,z2\n";
    for (Index i = 0; i < d.n(); ++i)
        s += fmt::format("{},{},{},{},{}\n", format_real(d.y()(i)), format_real(d.x()(i, 1)), format_real(d.x()(i, 2)),
                         format_real(d.z()(i, 0)), format_real(d.z()(i, 1)));
    write_text(path.string(), s);
}

int run_cli(const std::string& args, const fs::path& stderr_file) {
    const std::string cmd = fmt::format("{} {} > /dev/null 2> {}", MFUSE_CLI_PATH, args, stderr_file.string());
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("CSV parsing") {
    const CsvTable t = parse_csv("a,b\n1,2.5\nNA,\n-3e2,4\n");
    REQUIRE(t.values.rows() == 3);
    CHECK(t.values(0, 1) == 2.5);
    CHECK(std::isnan(t.values(1, 0)));
    CHECK(std::isnan(t.values(1, 1)));
    CHECK(t.values(2, 0) == -300.0);
    CHECK(t.column("b") == 1);
    CHECK_THROWS_AS(t.column("c"), SchemaError);
    try {
        parse_csv("a,b\n1,2\n3,x\n");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS(parse_csv("a,b\n1,2,3\n"));
}

TEST_CASE("column roles build the dataset") {
    const CsvTable t = parse_csv("y,u,v,w\n1,2,3,4\n5,6,7,8\n");
    ColumnRoles roles;
    roles.outcome = "y";
    roles.x = {"v"};
    roles.z = {"u", "w"};
    const Dataset d = dataset_from_table(t, roles);
    CHECK(d.x().cols() == 2);
    CHECK(d.x()(1, 0) == 1.0);
    CHECK(d.x()(1, 1) == 7.0);
    CHECK(d.z()(0, 1) == 4.0);
    roles.x = {"missing"};
    try {
        dataset_from_table(t, roles);
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("'missing'") != std::string::npos);
    }
}

TEST_CASE("external summary round trips") {
    const Dataset d = oracle::gaussian_dataset(500, 3, 0, 81);
    const auto t = Transformation::ratio(4, 1);
    const ExternalSummary s =
        summarize_external(fit_model(EquationFamily::linear(FeatureMap::columns(4, 0, false)), d), t);
    const ExternalSummary back = external_summary_from_string(external_summary_to_string(s));
    CHECK((back.theta_hat - s.theta_hat).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((back.cov_theta_hat.matrix() - s.cov_theta_hat.matrix()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(back.n_external == 500);
    CHECK(back.family == FamilyId::linear);
    CHECK(back.transformation().same_declaration(t));
    CHECK_THROWS_AS(external_summary_from_string("theta: [1, 2]\n"), Error);
}

TEST_CASE("config parsing reports the offending path") {
    try {
        parse_config("data:\n  internal: a.csv\n", "fuse");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("columns.outcome") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("scenario:\n  kind: linear\n  mc_replicates: many\n", "simulate"), ConfigError);
    const RunConfig c = parse_config("scenario:\n  kind: cate\n  seed: 7\n  offsets: [0, 0.1]\n", "simulate");
    CHECK(c.scenario.kind == ScenarioKind::cate);
    CHECK(c.scenario.base_seed == 7);
    CHECK(c.scenario.offsets.size() == 2);
}

TEST_CASE("fit then fuse end to end") {
    const fs::path dir = scratch("pipeline");
    write_dataset(oracle::gaussian_dataset(300, 2, 2, 82), dir / "internal.csv");
    write_dataset(oracle::gaussian_dataset(3000, 2, 2, 83), dir / "external.csv");
    write_text((dir / "fit.yaml").string(),
               fmt::format("data:\n  internal: {}\ncolumns:\n  outcome: y\n  x: [x1, x2]\noutput: {}\n",
                           (dir / "external.csv").string(), (dir / "ext").string()));
    REQUIRE(run_cli("fit --config " + (dir / "fit.yaml").string(), dir / "err.txt") == 0);
    CHECK(fs::exists(dir / "ext" / kParamsFile));
    CHECK(fs::exists(dir / "ext" / kCovarianceFile));

    write_text((dir / "fuse.yaml").string(),
               fmt::format("data:\n  internal: {}\n  external_summary: {}\ncolumns:\n  outcome: y\n  x: [x1, x2]\n"
                           "  z: [z1, z2]\noutput: {}\n",
                           (dir / "internal.csv").string(), (dir / "ext" / kSummaryFile).string(),
                           (dir / "fused").string()));
    REQUIRE(run_cli("fuse --config " + (dir / "fuse.yaml").string(), dir / "err.txt") == 0);
    const CsvTable fused = read_csv((dir / "fused" / kFusionFile).string());
    CHECK(fused.values.rows() == 5);

    // Library path agrees with the subcommand output.
    RunConfig cfg = load_config((dir / "fuse.yaml").string(), "fuse");
    const FuseOutput out = run_fuse(cfg);
    const CsvTable again = parse_csv(fusion_csv(out));
    CHECK(again.values.rows() == fused.values.rows());
}

TEST_CASE("errors exit with status 1 and name the error") {
    const fs::path dir = scratch("errors");
    write_dataset(oracle::gaussian_dataset(50, 2, 2, 84), dir / "data.csv");
    write_text((dir / "bad.yaml").string(),
               fmt::format("data:\n  internal: {}\ncolumns:\n  outcome: y\n  x: [x1, nope]\noutput: {}\n",
                           (dir / "data.csv").string(), dir.string()));
    CHECK(run_cli("fit --config " + (dir / "bad.yaml").string(), dir / "err.txt") == 1);
    CHECK(read_text((dir / "err.txt").string()).rfind("SchemaError: ", 0) == 0);

    write_text((dir / "cfg.yaml").string(), "scenario:\n  kind: linear\n  n_internal: 2\n");
    CHECK(run_cli("simulate --config " + (dir / "cfg.yaml").string(), dir / "err.txt") == 1);
    CHECK(read_text((dir / "err.txt").string()).rfind("ConfigError: ", 0) == 0);

    CHECK(run_cli("fit --config " + (dir / "absent.yaml").string(), dir / "err.txt") != 0);
    CHECK(run_cli("", dir / "err.txt") != 0);
}
