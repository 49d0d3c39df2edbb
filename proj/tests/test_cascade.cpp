#include "gbsde/cascade.hpp"
#include "gbsde/presets.hpp"

#include <doctest.h>

#include <cmath>

using namespace gbsde;

namespace {

const VolatilityBand kBand(0.5, 1.0);

CascadeConfig test_config(int nodes = 161, int param_nodes = 13) {
    CascadeConfig cc;
    cc.grid = SpaceGrid(-6.0, 6.0, nodes);
    cc.param_nodes = param_nodes;
    cc.solve.store_stride_time = 1.0 / 128.0;
    return cc;
}

ScenarioFamily small_family(double dt = 1.0 / 128.0, int paths = 64, uint64_t seed = 17) {
    return ScenarioFamily::extremes(kBand, dt, 1.0, paths, seed);
}

}  // namespace

TEST_CASE("cascade with one interval keeps affine data") {
    GeneratorSpec f = make_generator("zero", {}, 1);
    TerminalSpec phi = make_terminal("identity", {}, 1);
    CascadeSolution cas =
        solve_cascade(f, phi, TimePartition::uniform(1, 1.0), kBand, test_config());
    CHECK(cas.y0() == doctest::Approx(0.0).epsilon(1e-12));
    Vector b(1);
    b << 1.5;
    CHECK(cas.eval(1, 0.5, b).u == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(cas.eval(1, 0.5, b).du == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("constant driver cascade closed form") {
    const double c = 0.3;
    GeneratorSpec f = make_generator("constant", {{"c", c}}, 1);
    TerminalSpec phi = make_terminal("zero", {}, 1);
    CascadeSolution cas =
        solve_cascade(f, phi, TimePartition::uniform(1, 1.0), kBand, test_config());
    CHECK(cas.y0() == doctest::Approx(kBand.hi2() * c).epsilon(1e-3));
}

TEST_CASE("two-interval affine stitching") {
    GeneratorSpec f = make_generator("zero", {}, 2);
    TerminalSpec phi = make_terminal("affine", {{"a", 0.0}, {"b", 1.0}}, 2);
    CascadeSolution cas =
        solve_cascade(f, phi, TimePartition::uniform(2, 1.0), kBand, test_config());
    CHECK(cas.y0() == doctest::Approx(0.0).epsilon(1e-9));
    // u^2(t, x1, x2) = x1 + x2 and the stitched u^1(t, x1) = x1
    Vector b2(2);
    b2 << 0.8, -0.3;
    CHECK(cas.eval(2, 0.75, b2).u == doctest::Approx(0.5).epsilon(1e-8));
    Vector b1(1);
    b1 << 0.8;
    CHECK(cas.eval(1, 0.25, b1).u == doctest::Approx(0.8).epsilon(1e-8));
}

TEST_CASE("solution triple paths on closed-form presets") {
    SUBCASE("identity terminal: Y = B, Z = 1, K = 0") {
        GeneratorSpec f = make_generator("zero", {}, 1);
        TerminalSpec phi = make_terminal("identity", {}, 1);
        CascadeSolution cas =
            solve_cascade(f, phi, TimePartition::uniform(1, 1.0), kBand, test_config());
        SolutionTriplePaths paths = build_solution_paths(cas, small_family());
        CHECK(paths.rejections.empty());
        for (const auto& p : paths.paths) {
            CHECK((p.y - p.b).abs().maxCoeff() <= 1e-8);
            CHECK((p.z - 1.0).abs().maxCoeff() <= 1e-8);
            CHECK(p.k.abs().maxCoeff() <= 1e-8);
        }
        ResidualStats res = residual_check(paths, cas);
        CHECK(res.max_abs <= 1e-7);
    }
    SUBCASE("constant driver: K depends only on the realized qv") {
        const double c = 0.3;
        GeneratorSpec f = make_generator("constant", {{"c", c}}, 2);
        TerminalSpec phi = make_terminal("zero", {}, 2);
        CascadeSolution cas =
            solve_cascade(f, phi, TimePartition::uniform(2, 1.0), kBand, test_config());
        SolutionTriplePaths paths = build_solution_paths(cas, small_family());
        for (const auto& p : paths.paths) {
            CHECK(p.k[0] == 0.0);
            // K_t = c <B>_t - sigma_hi^2 c t
            for (long j = 0; j < paths.times.size(); j += 16) {
                double expected = c * p.qv[j] - kBand.hi2() * c * paths.times[j];
                CHECK(p.k[j] == doctest::Approx(expected).epsilon(5e-3));
            }
            // constant-high control: identically zero; constant-low: maximal decrease
            double kT = p.k[p.k.size() - 1];
            if (p.member == 1) CHECK(std::abs(kT) <= 1e-6);
            if (p.member == 0)
                CHECK(kT == doctest::Approx(c * (kBand.lo2() - kBand.hi2())).epsilon(2e-2));
        }
    }
}

TEST_CASE("pathwise k is nonincreasing and z respects the ledger") {
    GeneratorSpec f = make_generator("random-lipschitz", {{"seed", 9}}, 2);
    TerminalSpec phi = make_terminal("tanh", {}, 2);
    CascadeSolution cas =
        solve_cascade(f, phi, TimePartition::uniform(2, 1.0), kBand, test_config());
    ScenarioFamily family = ScenarioFamily::default_family(kBand, 1.0 / 128.0, 1.0, 24, 5);
    SolutionTriplePaths paths = build_solution_paths(cas, family);
    CHECK_FALSE(paths.paths.empty());
    double max_z = 0.0;
    for (const auto& p : paths.paths) {
        CHECK(p.k[0] == 0.0);
        for (long j = 1; j < p.k.size(); ++j) CHECK(p.k[j] <= p.k[j - 1] + 1e-12);
        max_z = std::max(max_z, p.z.abs().maxCoeff());
    }
    CHECK(max_z <= cas.ledger.m_z() + 10.0 * cas.intervals[0].slices[0].grid.dx());
    CHECK_FALSE(paths.y_bound_warning);
}

TEST_CASE("g-martingale property of K with a convex terminal") {
    // for convex data the high control is optimal and K vanishes along it
    GeneratorSpec f = make_generator("zero", {}, 1);
    TerminalSpec phi = make_terminal("quad-convex", {{"scale", 0.25}}, 1);
    CascadeSolution cas =
        solve_cascade(f, phi, TimePartition::uniform(1, 1.0), kBand, test_config(321));
    ScenarioFamily family = ScenarioFamily::default_family(kBand, 1.0 / 128.0, 1.0, 48, 77);
    SolutionTriplePaths paths = build_solution_paths(cas, family);
    std::vector<double> means(family.members.size(), 0.0);
    std::vector<int> counts(family.members.size(), 0);
    for (const auto& p : paths.paths) {
        means[p.member] += p.k[p.k.size() - 1];
        counts[p.member] += 1;
    }
    double sup = -1e300;
    for (std::size_t m = 0; m < means.size(); ++m) {
        if (counts[m] == 0) continue;
        means[m] /= counts[m];
        CHECK(means[m] <= 1e-6);  // every mean nonpositive
        sup = std::max(sup, means[m]);
    }
    CHECK(sup >= -5e-3);  // attained (near) zero at the high control
}

TEST_CASE("comparison: raising the terminal never lowers y0") {
    GeneratorSpec f = make_generator("linear-y", {{"alpha", 0.4}}, 1);
    TerminalSpec phi = make_terminal("tanh", {}, 1);
    TerminalSpec phi_up = phi;
    auto g = *phi.sum_form;
    phi_up.sum_form = [g](double s) { return g(s) + 0.05; };
    phi_up.phi = [g](Eigen::Ref<const Vector> x) { return g(x.sum()) + 0.05; };
    CascadeConfig cc = test_config();
    TimePartition part = TimePartition::uniform(1, 1.0);
    CHECK(solve_cascade(f, phi_up, part, kBand, cc).y0() >=
          solve_cascade(f, phi, part, kBand, cc).y0());
}

TEST_CASE("classical limit: k vanishes and y0 matches feynman-kac") {
    VolatilityBand classical(0.9, 0.9);
    GeneratorSpec f = make_generator("linear-y", {{"alpha", 0.5}}, 1);
    TerminalSpec phi = make_terminal("affine", {{"a", 2.0}, {"b", 0.0}}, 1);
    CascadeSolution cas =
        solve_cascade(f, phi, TimePartition::uniform(1, 1.0), classical, test_config());
    CHECK(cas.y0() == doctest::Approx(2.0 * std::exp(0.81 * 0.5)).epsilon(1e-2));
    ScenarioFamily fam{classical, 1.0 / 128.0, 1.0, 3, {}};
    fam.members.push_back({VolatilityControl::constant(0.9), 16});
    SolutionTriplePaths paths = build_solution_paths(cas, fam);
    for (const auto& p : paths.paths) CHECK(p.k.abs().maxCoeff() <= 1e-8);
}

TEST_CASE("residual shrinks under time-grid refinement") {
    GeneratorSpec f = make_generator("random-lipschitz", {{"seed", 4}}, 2);
    TerminalSpec phi = make_terminal("tanh", {}, 2);
    CascadeConfig cc = test_config(201);
    CascadeSolution cas = solve_cascade(f, phi, TimePartition::uniform(2, 1.0), kBand, cc);
    double prev = 1e300;
    for (double dt : {1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0}) {
        SolutionTriplePaths paths = build_solution_paths(cas, small_family(dt, 32, 23));
        ResidualStats res = residual_check(paths, cas);
        CHECK(res.non_finite_paths == 0);
        CHECK(res.max_abs < prev);
        prev = res.max_abs;
    }
    CHECK(prev <= 5e-2);
}

TEST_CASE("scenario grid must refine the partition") {
    GeneratorSpec f = make_generator("zero", {}, 2);
    TerminalSpec phi = make_terminal("zero", {}, 2);
    CascadeSolution cas = solve_cascade(f, phi, TimePartition({0.0, 0.3, 1.0}), kBand,
                                        test_config());
    CHECK_THROWS_AS(build_solution_paths(cas, small_family(1.0 / 128.0)), ConfigError);
}

TEST_CASE("reduced cascade matches the tensor cascade on sum drivers") {
    PathGeneratorSpec h = make_path_generator("clamped-path", {});
    TimePartition part = TimePartition::uniform(2, 1.0);
    TerminalSpec phi = make_terminal("tanh", {}, 2);

    GeneratorSpec f = discretize_path_generator(h, part);
    f.lip_x = 0.5;  // clamp slope
    CascadeConfig cc = test_config(201, 21);
    CascadeSolution tensor = solve_cascade(f, phi, part, kBand, cc);

    ReducedGenerator r = reduce_to_running_sum(h).value();
    r.lip_s = 0.5;
    ReducedCascade reduced =
        solve_cascade_reduced(r, *phi.sum_form, phi.bound, phi.lipschitz, part, kBand, cc);

    CHECK(reduced.y0() == doctest::Approx(tensor.y0()).epsilon(5e-3));

    ScenarioFamily fam = small_family(1.0 / 128.0, 16, 9);
    SolutionTriplePaths pt = build_solution_paths(tensor, fam);
    SolutionTriplePaths pr = build_solution_paths(reduced, fam);
    REQUIRE(pt.paths.size() == pr.paths.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < pt.paths.size(); ++i)
        worst = std::max(worst, (pt.paths[i].y - pr.paths[i].y).abs().maxCoeff());
    CHECK(worst <= 2e-2);  // parameter-grid interpolation is the gap
}
