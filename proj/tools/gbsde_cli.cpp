#include "gbsde/config.hpp"
#include "gbsde/runner.hpp"
#include "gbsde/types.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"gbsde: discrete backward equations under volatility uncertainty"};
    app.require_subcommand(1);

    std::string config_path;
    gbsde::CliOverrides overrides;
    std::string out_dir;
    long long seed = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment configuration (JSON)")->required();
        cmd->add_option("--out", out_dir, "output directory override");
        cmd->add_option("--seed", seed, "master seed override");
        cmd->add_option("--threads", overrides.threads, "worker thread count (0 = hardware)");
        cmd->add_flag("--strict", overrides.strict, "treat warnings as failures");
    };

    CLI::App* gheat = app.add_subcommand("gheat", "solve the G-heat equation and check oracles");
    CLI::App* solve = app.add_subcommand("solve", "solve the cascade and build (Y, Z, K) paths");
    CLI::App* verify = app.add_subcommand("verify", "run the enabled invariant sections");
    CLI::App* approx = app.add_subcommand("approx", "run the level-approximation pipeline");
    CLI::App* simulate = app.add_subcommand("simulate", "dump scenario paths to CSV");
    for (CLI::App* cmd : {gheat, solve, verify, approx, simulate}) add_common(cmd);

    CLI11_PARSE(app, argc, argv);

    try {
        gbsde::ExperimentConfig config = gbsde::load_config(config_path);
        if (!out_dir.empty()) overrides.out_dir = out_dir;
        if (seed >= 0) overrides.seed = static_cast<uint64_t>(seed);

        if (gheat->parsed()) return gbsde::cmd_gheat(config, overrides);
        if (solve->parsed()) return gbsde::cmd_solve(config, overrides);
        if (verify->parsed()) return gbsde::cmd_verify(config, overrides);
        if (approx->parsed()) return gbsde::cmd_approx(config, overrides);
        if (simulate->parsed()) return gbsde::cmd_simulate(config, overrides);
    } catch (const gbsde::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
