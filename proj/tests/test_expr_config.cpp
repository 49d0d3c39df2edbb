#include "gbsde/config.hpp"
#include "gbsde/expr.hpp"
#include "gbsde/presets.hpp"

#include <doctest.h>

#include <cmath>

using namespace gbsde;
using nlohmann::json;

TEST_CASE("expression grammar") {
    Vector x(2);
    x << 1.5, -0.5;

    SUBCASE("arithmetic and precedence") {
        Expression e = Expression::parse("1 + 2 * x1 - x2 / 2", 2);
        CHECK(e.eval(0.0, x, 0.0, 0.0) == doctest::Approx(1.0 + 3.0 + 0.25));
    }
    SUBCASE("functions and unary minus") {
        Expression e = Expression::parse("max(-y, min(z, 1)) + abs(-2) + pow(x1, 2)", 2);
        CHECK(e.eval(0.0, x, -3.0, 0.5) == doctest::Approx(3.0 + 2.0 + 2.25));
        Expression l = Expression::parse("log(exp(t))", 0);
        Vector empty(0);
        CHECK(l.eval(0.7, empty, 0.0, 0.0) == doctest::Approx(0.7));
    }
    SUBCASE("variable usage flags") {
        Expression e = Expression::parse("t + x2", 2);
        CHECK(e.uses_t());
        CHECK(e.uses_x());
        CHECK_FALSE(e.uses_y());
    }
    SUBCASE("errors name the position") {
        CHECK_THROWS_AS(Expression::parse("1 +", 0), ConfigError);
        CHECK_THROWS_AS(Expression::parse("x3", 2), ConfigError);
        CHECK_THROWS_AS(Expression::parse("foo(1)", 0), ConfigError);
        CHECK_THROWS_AS(Expression::parse("1 @ 2", 0), ConfigError);
        CHECK_THROWS_AS(Expression::parse("min(1)", 0), ConfigError);
    }
}

TEST_CASE("expression-backed presets") {
    GeneratorSpec f = make_generator(
        "expr", json{{"expr", "0.5 * y + 0.1 * x1"}, {"m0", 0.0}, {"lip_y", 0.5}, {"lip_x", 0.1}},
        1);
    Vector x(1);
    x << 2.0;
    CHECK(f(0.0, x, 1.0, 0.0) == doctest::Approx(0.7));
    CHECK(f.deps.y);
    CHECK_FALSE(f.deps.z);

    TerminalSpec phi = make_terminal("expr", json{{"expr", "abs(x1 - x2)"}, {"bound", 100.0},
                                                  {"lipschitz", 1.0}},
                                     2);
    Vector x2(2);
    x2 << 0.25, 1.0;
    CHECK(phi(x2) == doctest::Approx(0.75));
}

TEST_CASE("config parsing and validation") {
    json base = {
        {"version", 1},
        {"band", {{"sigma_lo", 0.5}, {"sigma_hi", 1.0}}},
        {"horizon", 1.0},
        {"partition", {{"dyadic_level", 1}}},
        {"generator", {{"id", "constant"}, {"params", {{"c", 0.3}}}}},
        {"terminal", {{"id", "zero"}}},
        {"scenarios", {{"dt", 0.0078125}, {"paths_per_control", 64}, {"family", "extremes"}}},
        {"master_seed", 9},
    };

    SUBCASE("round trip of a valid config") {
        ExperimentConfig cfg = parse_config(base);
        CHECK(cfg.band.sigma_hi == 1.0);
        CHECK(cfg.partition().intervals() == 2);
        CHECK(cfg.scenario_family().members.size() == 2);
        CHECK(cfg.space_grid().m == 401);
    }
    SUBCASE("unknown keys are rejected with the field name") {
        json bad = base;
        bad["gird"] = json::object();
        CHECK_THROWS_WITH_AS(parse_config(bad), doctest::Contains("gird"), ConfigError);
        json bad2 = base;
        bad2["grid"] = {{"nodess", 11}};
        CHECK_THROWS_WITH_AS(parse_config(bad2), doctest::Contains("nodess"), ConfigError);
    }
    SUBCASE("wrong types and ranges are named") {
        json bad = base;
        bad["horizon"] = "one";
        CHECK_THROWS_WITH_AS(parse_config(bad), doctest::Contains("horizon"), ConfigError);
        json bad2 = base;
        bad2["grid"] = {{"nodes", 2}};
        CHECK_THROWS_WITH_AS(parse_config(bad2), doctest::Contains("nodes"), ConfigError);
        json bad3 = base;
        bad3["version"] = 2;
        CHECK_THROWS_AS(parse_config(bad3), ConfigError);
    }
    SUBCASE("missing preset is caught at parse time") {
        json bad = base;
        bad["generator"] = {{"id", "nonexistent"}};
        CHECK_THROWS_WITH_AS(parse_config(bad), doctest::Contains("nonexistent"), ConfigError);
    }
    SUBCASE("partition must pick exactly one form") {
        json bad = base;
        bad["partition"] = {{"times", {0.0, 0.5, 1.0}}, {"dyadic_level", 1}};
        CHECK_THROWS_AS(parse_config(bad), ConfigError);
        json good = base;
        good["partition"] = {{"times", {0.0, 0.25, 1.0}}};
        CHECK(parse_config(good).partition().intervals() == 2);
    }
    SUBCASE("custom control family") {
        json custom = base;
        custom["scenarios"] = {
            {"dt", 0.015625},
            {"paths_per_control", 8},
            {"family",
             json::array({{{"kind", "constant"}, {"sigma", 0.5}},
                          {{"kind", "constant"}, {"sigma", 1.0}},
                          {{"kind", "bang-bang"},
                           {"before", 0.5},
                           {"after", 1.0},
                           {"switch_time", 0.5}}})}};
        ExperimentConfig cfg = parse_config(custom);
        CHECK(cfg.scenario_family().members.size() == 3);
        // dropping an extreme control fails family validation
        custom["scenarios"]["family"] = json::array({{{"kind", "constant"}, {"sigma", 0.7}}});
        ExperimentConfig cfg2 = parse_config(custom);
        CHECK_THROWS_AS(cfg2.scenario_family(), ConfigError);
    }
}
