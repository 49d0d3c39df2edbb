#pragma once

#include "gbsde/generator.hpp"
#include "gbsde/types.hpp"

#include <json.hpp>

#include <string>

namespace gbsde {

/// Built-in drivers selected by id with a parameter map, or "expr" with an
/// expression string plus declared constants. Unknown ids and parameters
/// throw ConfigError.
GeneratorSpec make_generator(const std::string& id, const nlohmann::json& params,
                             int num_increments);

/// Built-in terminal values. All built-ins read the increments through their
/// sum and therefore carry the sum form.
TerminalSpec make_terminal(const std::string& id, const nlohmann::json& params,
                           int num_increments);

/// Path-dependent drivers for the approximation pipeline.
PathGeneratorSpec make_path_generator(const std::string& id, const nlohmann::json& params);

std::vector<std::string> generator_preset_ids();
std::vector<std::string> terminal_preset_ids();
std::vector<std::string> path_generator_preset_ids();

}  // namespace gbsde
