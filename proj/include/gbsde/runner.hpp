#pragma once

#include "gbsde/config.hpp"
#include "gbsde/report.hpp"

#include <optional>

namespace gbsde {

struct CliOverrides {
    std::optional<std::string> out_dir;
    std::optional<uint64_t> seed;
    int threads = 0;   // 0: hardware default
    bool strict = false;  // warnings fail the run
};

/// Subcommand drivers. Each writes <out>/report.json (plus data files), prints
/// a human summary to stdout and returns 0 iff all enabled assertions pass
/// (warnings count as failures under --strict).
int cmd_gheat(ExperimentConfig config, const CliOverrides& overrides);
int cmd_solve(ExperimentConfig config, const CliOverrides& overrides);
int cmd_verify(ExperimentConfig config, const CliOverrides& overrides);
int cmd_approx(ExperimentConfig config, const CliOverrides& overrides);
int cmd_simulate(ExperimentConfig config, const CliOverrides& overrides);

/// Effective configuration echoed into every report.
OJson echo_config(const ExperimentConfig& config);

}  // namespace gbsde
