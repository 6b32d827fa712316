// qbm - run a scenario config and write CSV tables plus manifest.json.

#include <iostream>

#include <CLI11.hpp>

#include "qbm/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Quantum Brownian motion scenario runner"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string("qbm ") + QBM_VERSION);

    auto* run = app.add_subcommand("run", "Run the scenario described by a JSON config");
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    run->add_option("config", config, "Scenario config (JSON)")->required();
    auto* out_opt = run->add_option("--out", out, "Output directory (default: config \"output\", $QBM_OUT_DIR, ./qbm_out)");
    auto* seed_opt = run->add_option("--seed", seed, "Override numerics.seed");
    auto* threads_opt = run->add_option("--threads", threads, "Override numerics.threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << qbm::cli::diagnostic(qbm::cli::exit_validation, "usage", e.what()).dump() << '\n';
        return qbm::cli::exit_validation;
    }

    qbm::cli::RunOptions opt;
    if (*out_opt) opt.out = out;
    if (*seed_opt) opt.seed = seed;
    if (*threads_opt) opt.threads = threads;
    const auto res = qbm::cli::run_file(config, opt);
    if (res.exit_code != qbm::cli::exit_ok) {
        std::cerr << res.diagnostic.dump() << '\n';
        return res.exit_code;
    }
    for (const auto& w : res.manifest["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
    std::cout << (res.out_dir / "manifest.json").string() << '\n';
    return qbm::cli::exit_ok;
}
