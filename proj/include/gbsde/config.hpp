#pragma once

#include "gbsde/grid.hpp"
#include "gbsde/scenarios.hpp"
#include "gbsde/types.hpp"

#include <json.hpp>

#include <optional>
#include <set>
#include <string>

namespace gbsde {

/// Parsed and validated experiment configuration. Parsing is strict: unknown
/// keys, wrong types and missing presets are ConfigErrors naming the field.
struct ExperimentConfig {
    int version = 1;
    VolatilityBand band{0.5, 1.0};
    double horizon = 1.0;

    // partition: explicit knots or a dyadic level
    std::vector<double> partition_times;  // includes 0 and horizon when set
    int dyadic_level = -1;

    // grid
    double grid_width_multiplier = 6.0;
    int grid_nodes = 401;
    double cfl_safety = 0.4;
    int param_nodes = 21;
    double dt_max = 0.0;
    double store_stride_time = 0.0;

    std::string generator_id = "zero";
    nlohmann::json generator_params = nlohmann::json::object();
    std::string terminal_id = "identity";
    nlohmann::json terminal_params = nlohmann::json::object();
    std::string path_generator_id;
    nlohmann::json path_generator_params = nlohmann::json::object();

    // scenarios
    double scenario_dt = 1.0 / 256.0;
    int paths_per_control = 512;
    std::string family_kind = "default";  // "default" | "extremes" | "custom"
    std::vector<VolatilityControl> custom_controls;

    std::set<std::string> analysis;  // enabled verify sections

    std::vector<int> approx_levels = {2, 3, 4};
    double embed_alpha = 3.0;
    int moll_nodes = 16;

    std::string output_dir = "out";
    uint64_t master_seed = 1;

    TimePartition partition() const;
    SpaceGrid space_grid() const;
    ScenarioFamily scenario_family() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Names of the verify sections enabled by default.
const std::set<std::string>& default_analysis_sections();

/// Human-readable schema of the accepted configuration (also shipped in docs/).
std::string config_schema_text();

}  // namespace gbsde
