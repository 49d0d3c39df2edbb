#include "gbsde/config.hpp"
#include "gbsde/runner.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace gbsde;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json small_config() {
    return json{
        {"version", 1},
        {"band", {{"sigma_lo", 0.5}, {"sigma_hi", 1.0}}},
        {"horizon", 1.0},
        {"partition", {{"dyadic_level", 1}}},
        {"grid", {{"nodes", 161}, {"param_nodes", 11}}},
        {"generator", {{"id", "constant"}, {"params", {{"c", 0.3}}}}},
        {"terminal", {{"id", "zero"}}},
        {"scenarios", {{"dt", 0.0078125}, {"paths_per_control", 48}, {"family", "extremes"}}},
        {"master_seed", 11},
    };
}

}  // namespace

TEST_CASE("cmd_gheat writes a report with a passing oracle") {
    TempDir tmp("gbsde_test_gheat");
    json j = small_config();
    j["terminal"] = {{"id", "quad-convex"}};
    j["grid"] = {{"nodes", 401}};
    ExperimentConfig cfg = parse_config(j);
    CliOverrides ov;
    ov.out_dir = (tmp.path / "out").string();
    CHECK(cmd_gheat(cfg, ov) == 0);
    json report = json::parse(slurp(tmp.path / "out" / "report.json"));
    CHECK(report["pass"].get<bool>());
    CHECK(report["command"] == "gheat");
    CHECK(fs::exists(tmp.path / "out" / "gheat_u.csv"));
    CHECK(fs::exists(tmp.path / "out" / "gheat_header.json"));
}

TEST_CASE("cmd_solve on the constant driver passes its oracle") {
    TempDir tmp("gbsde_test_solve");
    ExperimentConfig cfg = parse_config(small_config());
    CliOverrides ov;
    ov.out_dir = (tmp.path / "out").string();
    CHECK(cmd_solve(cfg, ov) == 0);
    json report = json::parse(slurp(tmp.path / "out" / "report.json"));
    CHECK(report["pass"].get<bool>());
    CHECK(fs::exists(tmp.path / "out" / "paths.csv"));
    CHECK(fs::exists(tmp.path / "out" / "solve_summary.json"));
    bool found = false;
    for (const auto& s : report["sections"])
        if (s["name"] == "oracle")
            for (const auto& a : s["assertions"])
                if (a["name"] == "constant_driver_y0") found = a["pass"].get<bool>();
    CHECK(found);
}

TEST_CASE("cmd_verify is deterministic byte for byte") {
    TempDir tmp("gbsde_test_verify");
    json j = small_config();
    j["scenarios"]["paths_per_control"] = 200;
    j["scenarios"]["family"] = "default";
    ExperimentConfig cfg = parse_config(j);

    CliOverrides ov1;
    ov1.out_dir = (tmp.path / "a").string();
    ov1.threads = 1;
    CHECK(cmd_verify(cfg, ov1) == 0);
    CliOverrides ov2;
    ov2.out_dir = (tmp.path / "b").string();
    ov2.threads = 2;  // schedule independence
    CHECK(cmd_verify(cfg, ov2) == 0);
    CHECK(slurp(tmp.path / "a" / "report.json") == slurp(tmp.path / "b" / "report.json"));

    // a different seed must change the report (the seed is echoed and used)
    CliOverrides ov3;
    ov3.out_dir = (tmp.path / "c").string();
    ov3.seed = 999;
    cmd_verify(cfg, ov3);
    CHECK(slurp(tmp.path / "a" / "report.json") != slurp(tmp.path / "c" / "report.json"));
}

TEST_CASE("cmd_approx runs the clamped preset on small levels") {
    TempDir tmp("gbsde_test_approx");
    json j = small_config();
    j["generator"] = {{"id", "zero"}};
    j["terminal"] = {{"id", "clamped-identity"}};
    j["path_generator"] = {{"id", "clamped-path"}};
    j["scenarios"] = {{"dt", 0.0078125}, {"paths_per_control", 48}, {"family", "extremes"}};
    j["approx"] = {{"levels", {2, 3}}, {"moll_nodes", 10}};
    ExperimentConfig cfg = parse_config(j);
    CliOverrides ov;
    ov.out_dir = (tmp.path / "out").string();
    int rc = cmd_approx(cfg, ov);
    CHECK(rc == 0);
    CHECK(fs::exists(tmp.path / "out" / "approx_levels.csv"));
}

TEST_CASE("strict mode turns warnings into failures") {
    TempDir tmp("gbsde_test_strict");
    json j = small_config();
    j["terminal"] = {{"id", "identity"}};  // unbounded: solve warns
    j["generator"] = {{"id", "zero"}};
    ExperimentConfig cfg = parse_config(j);
    CliOverrides relaxed;
    relaxed.out_dir = (tmp.path / "a").string();
    CHECK(cmd_solve(cfg, relaxed) == 0);
    CliOverrides strict;
    strict.out_dir = (tmp.path / "b").string();
    strict.strict = true;
    CHECK(cmd_solve(cfg, strict) == 1);
}

TEST_CASE("cmd_simulate dumps scenario paths") {
    TempDir tmp("gbsde_test_sim");
    json j = small_config();
    j["scenarios"]["paths_per_control"] = 4;
    ExperimentConfig cfg = parse_config(j);
    CliOverrides ov;
    ov.out_dir = (tmp.path / "out").string();
    CHECK(cmd_simulate(cfg, ov) == 0);
    std::string csv = slurp(tmp.path / "out" / "scenarios.csv");
    CHECK(csv.rfind("control,path,t,B,qv", 0) == 0);
}
