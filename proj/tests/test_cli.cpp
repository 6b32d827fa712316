#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qbm/cli.hpp"

using namespace qbm;
using cli::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("qbm_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::vector<double>> csv_rows(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::vector<double> r;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
        rows.push_back(r);
    }
    return rows;
}

cli::RunResult run(const json& cfg, const fs::path& out) {
    cli::RunOptions opt;
    opt.out = out.string();
    return cli::run_json(cfg, {}, opt);
}

} // namespace

TEST(Cli, ExtractUncoupledGivesConstantRows) {
    const auto out = scratch("extract0");
    const json cfg = {{"scenario", "extract"},
                      {"spectrum", {{"kind", "ohmic"}, {"gamma", 0.0}, {"cutoff", 2.0}}},
                      {"bath", {{"modes", 8}}},
                      {"numerics", {{"horizon", 5.0}, {"samples", 51}}}};
    const auto r = run(cfg, out);
    ASSERT_EQ(r.exit_code, 0) << r.diagnostic.dump();
    const auto rows = csv_rows(out / "coefficients.csv");
    ASSERT_EQ(rows.size(), 51u);
    for (const auto& row : rows) {
        ASSERT_EQ(row.size(), 6u);
        EXPECT_NEAR(row[1], 1.0, 1e-10);
        EXPECT_NEAR(row[2], 0.0, 1e-10);
        EXPECT_NEAR(row[3], 0.0, 1e-10);
        EXPECT_NEAR(row[4], 0.0, 1e-10);
        EXPECT_EQ(row[5], 0.0);
    }
    EXPECT_EQ(slurp(out / "coefficients.csv").rfind("# schema: qbm.master_coefficients.v1\n", 0), 0u);
    fs::remove_all(out);
}

TEST(Cli, LocalityDefaultsStayLocal) {
    const auto out = scratch("locality");
    const auto r = run(json{{"scenario", "locality"}}, out);
    ASSERT_EQ(r.exit_code, 0) << r.diagnostic.dump();
    const json m = json::parse(slurp(out / "manifest.json"));
    EXPECT_LE(m["results"]["max_deviation"].get<double>(), 1e-6);
    EXPECT_TRUE(m["results"]["local"].get<bool>());
    EXPECT_EQ(m["scenario"], "locality");
    EXPECT_EQ(m["config_hash"].get<std::string>().rfind("fnv1a64:", 0), 0u);
    for (const auto& o : m["outputs"]) EXPECT_TRUE(fs::exists(out / o["file"].get<std::string>()));
    fs::remove_all(out);
}

TEST(Cli, NegativeGammaIsRejectedWithoutOutput) {
    const auto out = scratch("bad");
    const json cfg = {{"scenario", "extract"}, {"spectrum", {{"kind", "ohmic"}, {"gamma", -0.1}}}};
    const auto r = run(cfg, out);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_EQ(r.diagnostic["kind"], "validation");
    EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, UnknownKeysAndBadValuesAreRejected) {
    const auto out = scratch("unknown");
    EXPECT_EQ(run(json{{"scenario", "extract"}, {"sceanrio_typo", 1}}, out).exit_code, 2);
    const auto nested = run(json{{"scenario", "extract"}, {"bath", {{"nodes", 4}}}}, out);
    EXPECT_EQ(nested.exit_code, 2);
    EXPECT_NE(nested.diagnostic["message"].get<std::string>().find("config.bath.nodes"), std::string::npos);
    EXPECT_EQ(run(json{{"scenario", "fly"}}, out).exit_code, 2);
    EXPECT_EQ(run(json{{"params", {{"mass", 1.0}}}}, out).exit_code, 2);
    EXPECT_EQ(run(json{{"scenario", "kernel"}, {"numerics", {{"samples", "many"}}}}, out).exit_code, 2);
    EXPECT_EQ(run(json{{"scenario", "kernel"}, {"params", {{"temperature", 0.0}}}}, out).exit_code, 2);
    EXPECT_EQ(run(json{{"scenario", "decohere"}, {"grid", {{"q_points", 0}}}}, out).exit_code, 2);
    EXPECT_EQ(run(json{{"scenario", "decohere"}, {"grid", {{"q_points", 3000}, {"p_points", 3000}}}}, out).exit_code, 2);
    EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, DivergentRequestIsAValidationError) {
    const auto out = scratch("divergent");
    // s = 2: the mass-shift integral diverges logarithmically at low frequency.
    const json cfg = {{"scenario", "counterpunch"},
                      {"spectrum", {{"kind", "supra_ohmic"}, {"exponent", 2.0}, {"cutoff", 10.0}, {"delta_mass", 1.0}}}};
    const auto r = run(cfg, out);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_EQ(r.diagnostic["kind"], "divergent_integral");
    EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, OutputIsReproducible) {
    const auto a = scratch("rep_a"), b = scratch("rep_b");
    const json cfg = {{"scenario", "simulate"},
                      {"spectrum", {{"gamma", 0.2}, {"cutoff", 5.0}}},
                      {"bath", {{"modes", 64}}},
                      {"numerics", {{"horizon", 2.0}, {"trajectories", 20}, {"seed", 3}}}};
    ASSERT_EQ(run(cfg, a).exit_code, 0);
    cli::RunOptions opt;
    opt.out = b.string();
    opt.threads = 2;
    ASSERT_EQ(cli::run_json(cfg, {}, opt).exit_code, 0);
    for (const char* f : {"trajectory.csv", "ensemble.csv"}) {
        EXPECT_FALSE(slurp(a / f).empty());
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    const json ma = json::parse(slurp(a / "manifest.json")), mb = json::parse(slurp(b / "manifest.json"));
    EXPECT_EQ(ma["config_hash"], mb["config_hash"]);
    EXPECT_EQ(ma["config"], cfg);

    const auto c = scratch("rep_c");
    opt.out = c.string();
    opt.seed = 4;
    ASSERT_EQ(cli::run_json(cfg, {}, opt).exit_code, 0);
    EXPECT_NE(slurp(a / "trajectory.csv"), slurp(c / "trajectory.csv"));
    for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST(Cli, KernelAndTwoOscillatorScenarios) {
    const auto out = scratch("kernel");
    const json k = {{"scenario", "kernel"},
                    {"spectrum", {{"gamma", 0.1}, {"cutoff", 50.0}}},
                    {"numerics", {{"horizon", 0.2}, {"samples", 11}}}};
    ASSERT_EQ(run(k, out).exit_code, 0);
    const auto rows = csv_rows(out / "kernel.csv");
    ASSERT_EQ(rows.size(), 11u);
    EXPECT_NEAR(rows[0][1], 0.4 / pi * 50.0, 1e-8);
    EXPECT_NEAR(rows[0][2], 1.0 * 0.4 / pi * 50.0, 1e-6);

    const auto out2 = scratch("eq10");
    const auto r = run(json{{"scenario", "eq10"}, {"eq10", {{"cross_coupling", 1.0}}}}, out2);
    ASSERT_EQ(r.exit_code, 0);
    EXPECT_NEAR(r.manifest["results"]["entangled_global_purity"].get<double>(), 1.0, 1e-9);
    EXPECT_LT(r.manifest["results"]["entangled_reduced_purity"].get<double>(), 1.0);
    EXPECT_LT(r.manifest["results"]["correlated_global_purity"].get<double>(), 1.0);
    fs::remove_all(out);
    fs::remove_all(out2);
}

TEST(Cli, DecohereWritesWignerGrid) {
    const auto out = scratch("decohere");
    const json cfg = {{"scenario", "decohere"},
                      {"params", {{"temperature", 10.0}}},
                      {"spectrum", {{"gamma", 0.1}, {"cutoff", 10.0}}},
                      {"beta", "quantum"},
                      {"bath", {{"modes", 128}}},
                      {"numerics", {{"horizon", 1.0}, {"samples", 101}}},
                      {"grid", {{"q_points", 1}, {"p_points", 1}, {"q_min", 0.0}, {"q_max", 0.0}, {"p_min", 0.0}, {"p_max", 0.0}}}};
    const auto r = run(cfg, out);
    ASSERT_EQ(r.exit_code, 0) << r.diagnostic.dump();
    EXPECT_EQ(csv_rows(out / "wigner_final.csv").size(), 1u);
    const auto vis = csv_rows(out / "decoherence.csv");
    EXPECT_NEAR(vis[0][1], 1.0, 1e-12);
    EXPECT_LT(vis.back()[1], 0.01);
    fs::remove_all(out);
}

TEST(Cli, ShippedConfigsParse) {
    for (const auto& e : fs::directory_iterator(fs::path(QBM_SOURCE_DIR) / "configs")) {
        const json j = json::parse(slurp(e.path()));
        if (e.path().filename().string().rfind("invalid_", 0) == 0)
            EXPECT_THROW(cli::parse_config(j, e.path().parent_path()), ValidationError) << e.path();
        else
            EXPECT_NO_THROW(cli::parse_config(j, e.path().parent_path())) << e.path();
    }
}

TEST(Cli, ToolExitCodes) {
    const auto out = scratch("tool");
    const std::string tool = QBM_TOOL_PATH;
    const std::string cfg = (fs::path(QBM_SOURCE_DIR) / "configs").string();
    auto status = [](const std::string& cmd) {
        const int s = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    EXPECT_EQ(status(tool + " run " + cfg + "/eq10_demo.json --out " + out.string()), 0);
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
    EXPECT_EQ(status(tool + " run " + cfg + "/invalid_negative_gamma.json --out " + (out / "bad").string()), 2);
    EXPECT_FALSE(fs::exists(out / "bad"));
    EXPECT_EQ(status(tool + " run /nonexistent.json --out " + (out / "bad").string()), 2);
    EXPECT_EQ(status(tool + " frobnicate"), 2);
    EXPECT_EQ(status("QBM_OUT_DIR=" + (out / "env").string() + " " + tool + " run " + cfg + "/eq10_demo.json"), 0);
    EXPECT_TRUE(fs::exists(out / "env" / "eq10.csv"));
    fs::remove_all(out);
}
