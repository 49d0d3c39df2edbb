#include "gbsde/config.hpp"

#include "gbsde/presets.hpp"

#include <cmath>
#include <fstream>

namespace gbsde {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
}

double require_number(const json& obj, const std::string& where, const std::string& key,
                      double fallback, bool required = false) {
    if (!obj.contains(key)) {
        if (required) throw ConfigError(where + "." + key + ": missing required field");
        return fallback;
    }
    if (!obj[key].is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return obj[key].get<double>();
}

long require_integer(const json& obj, const std::string& where, const std::string& key,
                     long fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer())
        throw ConfigError(where + "." + key + ": expected an integer");
    return obj[key].get<long>();
}

std::string require_string(const json& obj, const std::string& where, const std::string& key,
                           const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_string()) throw ConfigError(where + "." + key + ": expected a string");
    return obj[key].get<std::string>();
}

VolatilityControl parse_control(const json& c, const std::string& where) {
    std::string kind = require_string(c, where, "kind", "");
    if (kind == "constant") {
        reject_unknown(c, where, {"kind", "sigma"});
        return VolatilityControl::constant(require_number(c, where, "sigma", 0.0, true));
    }
    if (kind == "bang-bang") {
        reject_unknown(c, where, {"kind", "before", "after", "switch_time"});
        return VolatilityControl::bang_bang(require_number(c, where, "before", 0.0, true),
                                            require_number(c, where, "after", 0.0, true),
                                            require_number(c, where, "switch_time", 0.0, true));
    }
    if (kind == "piecewise-random") {
        reject_unknown(c, where, {"kind"});
        return VolatilityControl::piecewise_random();
    }
    throw ConfigError(where + ".kind: unknown control kind '" + kind + "'");
}

}  // namespace

const std::set<std::string>& default_analysis_sections() {
    static const std::set<std::string> sections = {
        "qv_band",  "upper_expectation", "ito",       "doleans",  "girsanov",
        "bmo",      "cascade",           "tilt",      "linearization", "stability"};
    return sections;
}

ExperimentConfig parse_config(const json& j) {
    reject_unknown(j, "config",
                   {"version", "band", "horizon", "partition", "grid", "generator", "terminal",
                    "path_generator", "scenarios", "analysis", "approx", "output_dir",
                    "master_seed"});
    ExperimentConfig cfg;
    long version = require_integer(j, "config", "version", -1);
    if (version != 1) throw ConfigError("config.version: expected 1");

    if (j.contains("band")) {
        reject_unknown(j["band"], "config.band", {"sigma_lo", "sigma_hi"});
        double lo = require_number(j["band"], "config.band", "sigma_lo", 0.5);
        double hi = require_number(j["band"], "config.band", "sigma_hi", 1.0);
        if (!(lo > 0.0) || !(lo <= hi))
            throw ConfigError("config.band: need 0 < sigma_lo <= sigma_hi");
        cfg.band = VolatilityBand(lo, hi);
    }
    cfg.horizon = require_number(j, "config", "horizon", 1.0);
    if (!(cfg.horizon > 0.0)) throw ConfigError("config.horizon: must be positive");

    if (j.contains("partition")) {
        const json& p = j["partition"];
        reject_unknown(p, "config.partition", {"times", "dyadic_level"});
        if (p.contains("times") == p.contains("dyadic_level"))
            throw ConfigError("config.partition: give exactly one of 'times' or 'dyadic_level'");
        if (p.contains("times")) {
            if (!p["times"].is_array())
                throw ConfigError("config.partition.times: expected an array");
            for (const auto& v : p["times"]) {
                if (!v.is_number())
                    throw ConfigError("config.partition.times: entries must be numbers");
                cfg.partition_times.push_back(v.get<double>());
            }
            if (cfg.partition_times.size() < 2 || cfg.partition_times.front() != 0.0 ||
                std::abs(cfg.partition_times.back() - cfg.horizon) > 1e-12)
                throw ConfigError("config.partition.times: must run from 0 to the horizon");
        } else {
            cfg.dyadic_level = static_cast<int>(
                require_integer(p, "config.partition", "dyadic_level", 1));
            if (cfg.dyadic_level < 0)
                throw ConfigError("config.partition.dyadic_level: must be >= 0");
        }
    } else {
        cfg.dyadic_level = 1;
    }

    if (j.contains("grid")) {
        const json& g = j["grid"];
        reject_unknown(g, "config.grid",
                       {"width_multiplier", "nodes", "cfl_safety", "param_nodes", "dt_max",
                        "store_stride_time"});
        cfg.grid_width_multiplier = require_number(g, "config.grid", "width_multiplier", 6.0);
        cfg.grid_nodes = static_cast<int>(require_integer(g, "config.grid", "nodes", 401));
        cfg.cfl_safety = require_number(g, "config.grid", "cfl_safety", 0.4);
        cfg.param_nodes = static_cast<int>(require_integer(g, "config.grid", "param_nodes", 21));
        cfg.dt_max = require_number(g, "config.grid", "dt_max", 0.0);
        cfg.store_stride_time = require_number(g, "config.grid", "store_stride_time", 0.0);
        if (cfg.grid_nodes < 3) throw ConfigError("config.grid.nodes: expected an integer >= 3");
        if (!(cfg.cfl_safety > 0.0) || cfg.cfl_safety > 0.5)
            throw ConfigError("config.grid.cfl_safety: must lie in (0, 0.5]");
        if (cfg.param_nodes < 2) throw ConfigError("config.grid.param_nodes: must be >= 2");
    }

    auto parse_preset = [&](const char* key, std::string& id, json& params,
                            const std::string& fallback) {
        if (!j.contains(key)) {
            id = fallback;
            return;
        }
        const json& p = j[key];
        reject_unknown(p, std::string("config.") + key, {"id", "params"});
        id = require_string(p, std::string("config.") + key, "id", fallback);
        if (p.contains("params")) params = p["params"];
    };
    parse_preset("generator", cfg.generator_id, cfg.generator_params, "zero");
    parse_preset("terminal", cfg.terminal_id, cfg.terminal_params, "identity");
    parse_preset("path_generator", cfg.path_generator_id, cfg.path_generator_params, "");

    if (j.contains("scenarios")) {
        const json& s = j["scenarios"];
        reject_unknown(s, "config.scenarios", {"dt", "paths_per_control", "family"});
        cfg.scenario_dt = require_number(s, "config.scenarios", "dt", cfg.scenario_dt);
        cfg.paths_per_control = static_cast<int>(
            require_integer(s, "config.scenarios", "paths_per_control", cfg.paths_per_control));
        if (cfg.paths_per_control < 1)
            throw ConfigError("config.scenarios.paths_per_control: must be >= 1");
        if (s.contains("family")) {
            if (s["family"].is_string()) {
                cfg.family_kind = s["family"].get<std::string>();
                if (cfg.family_kind != "default" && cfg.family_kind != "extremes")
                    throw ConfigError(
                        "config.scenarios.family: expected 'default', 'extremes' or an array");
            } else if (s["family"].is_array()) {
                cfg.family_kind = "custom";
                int idx = 0;
                for (const auto& c : s["family"]) {
                    cfg.custom_controls.push_back(parse_control(
                        c, "config.scenarios.family[" + std::to_string(idx) + "]"));
                    ++idx;
                }
            } else {
                throw ConfigError("config.scenarios.family: expected a string or an array");
            }
        }
    }

    if (j.contains("analysis")) {
        const json& a = j["analysis"];
        if (!a.is_object()) throw ConfigError("config.analysis: expected an object of booleans");
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (!default_analysis_sections().count(it.key()))
                throw ConfigError("config.analysis: unknown section '" + it.key() + "'");
            if (!it.value().is_boolean())
                throw ConfigError("config.analysis." + it.key() + ": expected a boolean");
            if (it.value().get<bool>()) cfg.analysis.insert(it.key());
        }
    } else {
        cfg.analysis = default_analysis_sections();
    }

    if (j.contains("approx")) {
        const json& a = j["approx"];
        reject_unknown(a, "config.approx", {"levels", "embed_alpha", "moll_nodes"});
        if (a.contains("levels")) {
            if (!a["levels"].is_array())
                throw ConfigError("config.approx.levels: expected an array of integers");
            cfg.approx_levels.clear();
            for (const auto& v : a["levels"]) {
                if (!v.is_number_integer())
                    throw ConfigError("config.approx.levels: entries must be integers");
                cfg.approx_levels.push_back(v.get<int>());
            }
        }
        cfg.embed_alpha = require_number(a, "config.approx", "embed_alpha", cfg.embed_alpha);
        cfg.moll_nodes = static_cast<int>(
            require_integer(a, "config.approx", "moll_nodes", cfg.moll_nodes));
    }

    cfg.output_dir = require_string(j, "config", "output_dir", cfg.output_dir);
    cfg.master_seed = static_cast<uint64_t>(require_integer(j, "config", "master_seed", 1));

    // referenced presets must exist: constructing them validates id and params
    (void)make_terminal(cfg.terminal_id, cfg.terminal_params, 1);
    TimePartition part = cfg.partition();
    (void)make_generator(cfg.generator_id, cfg.generator_params, part.intervals());
    if (!cfg.path_generator_id.empty())
        (void)make_path_generator(cfg.path_generator_id, cfg.path_generator_params);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

TimePartition ExperimentConfig::partition() const {
    if (!partition_times.empty()) return TimePartition(partition_times);
    return TimePartition::dyadic(dyadic_level, horizon);
}

SpaceGrid ExperimentConfig::space_grid() const {
    double hw = grid_width_multiplier * band.sigma_hi * std::sqrt(horizon);
    return SpaceGrid(-hw, hw, grid_nodes);
}

ScenarioFamily ExperimentConfig::scenario_family() const {
    if (family_kind == "default")
        return ScenarioFamily::default_family(band, scenario_dt, horizon, paths_per_control,
                                              master_seed);
    if (family_kind == "extremes")
        return ScenarioFamily::extremes(band, scenario_dt, horizon, paths_per_control,
                                        master_seed);
    ScenarioFamily fam{band, scenario_dt, horizon, master_seed, {}};
    for (const auto& c : custom_controls) fam.members.push_back({c, paths_per_control});
    fam.validate();
    return fam;
}

std::string config_schema_text() {
    return R"({
  "version": 1,
  "band": {"sigma_lo": 0.5, "sigma_hi": 1.0},
  "horizon": 1.0,
  "partition": {"dyadic_level": 1} ,
  "grid": {"width_multiplier": 6.0, "nodes": 401, "cfl_safety": 0.4,
           "param_nodes": 21, "dt_max": 0.0, "store_stride_time": 0.0},
  "generator": {"id": "constant", "params": {"c": 0.3}},
  "terminal": {"id": "zero", "params": {}},
  "path_generator": {"id": "clamped-path", "params": {}},
  "scenarios": {"dt": 0.00390625, "paths_per_control": 512, "family": "default"},
  "analysis": {"qv_band": true, "upper_expectation": true, "ito": true, "doleans": true,
               "girsanov": true, "bmo": true, "cascade": true, "tilt": true,
               "linearization": true, "stability": true},
  "approx": {"levels": [2, 3, 4], "embed_alpha": 3.0, "moll_nodes": 16},
  "output_dir": "out",
  "master_seed": 1
})";
}

}  // namespace gbsde
