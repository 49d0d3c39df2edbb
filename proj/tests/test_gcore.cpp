#include "gbsde/generator.hpp"
#include "gbsde/gfunction.hpp"
#include "gbsde/ledger.hpp"
#include "gbsde/presets.hpp"
#include "gbsde/types.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gbsde;

TEST_CASE("g_function closed forms") {
    VolatilityBand band(0.5, 1.0);
    CHECK(g_function(0.0, band) == 0.0);
    CHECK(g_function(2.0, band) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g_function(-2.0, band) == doctest::Approx(-0.25).epsilon(1e-15));
}

TEST_CASE("g_function monotone, subadditive, positively homogeneous") {
    VolatilityBand band(0.4, 1.3);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-5.0, 5.0);
    for (int i = 0; i < 500; ++i) {
        double a = uni(rng), b = uni(rng);
        double lam = std::abs(uni(rng));
        if (a > b) std::swap(a, b);
        CHECK(g_function(a, band) <= g_function(b, band) + 1e-14);
        CHECK(g_function(a + b, band) <= g_function(a, band) + g_function(b, band) + 1e-12);
        CHECK(g_function(lam * a, band) == doctest::Approx(lam * g_function(a, band)).epsilon(1e-12));
    }
}

TEST_CASE("g_function classical limit is half sigma^2 a") {
    VolatilityBand band(0.7, 0.7);
    for (double a : {-3.0, -0.2, 0.0, 0.4, 11.0})
        CHECK(g_function(a, band) == doctest::Approx(0.5 * 0.49 * a).epsilon(1e-15));
}

TEST_CASE("g_function elementwise matches scalar") {
    VolatilityBand band(0.5, 1.1);
    Array a(5);
    a << -2.0, -0.1, 0.0, 0.3, 4.0;
    Array g = g_function(a, band);
    for (int i = 0; i < a.size(); ++i) CHECK(g[i] == doctest::Approx(g_function(a[i], band)));
}

TEST_CASE("volatility band validation") {
    CHECK_THROWS_AS(VolatilityBand(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(VolatilityBand(-0.5, 1.0), DomainError);
    CHECK_THROWS_AS(VolatilityBand(1.2, 1.0), DomainError);
}

TEST_CASE("time partition basics") {
    TimePartition p = TimePartition::uniform(4, 2.0);
    CHECK(p.intervals() == 4);
    CHECK(p.mesh() == doctest::Approx(0.5));
    CHECK(p.interval_of(0.0) == 1);
    CHECK(p.interval_of(0.5) == 1);
    CHECK(p.interval_of(0.500001) == 2);
    CHECK(p.interval_of(2.0) == 4);
    CHECK_THROWS_AS(p.interval_of(2.5), DomainError);
    CHECK_THROWS_AS(TimePartition({0.0, 0.5, 0.5, 1.0}), DomainError);
    CHECK_THROWS_AS(TimePartition({0.1, 0.5, 1.0}), DomainError);

    TimePartition coarse = TimePartition::dyadic(1, 1.0);
    TimePartition fine = TimePartition::dyadic(3, 1.0);
    CHECK(fine.contains(coarse));
    CHECK_FALSE(coarse.contains(fine));
}

TEST_CASE("embed_path knot values and stopping") {
    TimePartition p = TimePartition::uniform(2, 1.0);

    SUBCASE("zero increments give the zero path") {
        Vector x = Vector::Zero(2);
        PiecewisePath path = embed_path(x, p, 0.7);
        for (double s : {0.0, 0.3, 0.5, 0.7, 0.9, 1.0}) CHECK(path(s) == 0.0);
    }

    SUBCASE("single interval straight line") {
        TimePartition single = TimePartition::uniform(1, 1.0);
        Vector x(1);
        x << 1.0;
        PiecewisePath path = embed_path(x, single, 1.0);
        CHECK(path(0.0) == 0.0);
        CHECK(path(0.25) == doctest::Approx(0.25));
        CHECK(path(1.0) == doctest::Approx(1.0));
    }

    SUBCASE("two intervals, stopped at T") {
        Vector x(2);
        x << 1.0, -1.0;
        PiecewisePath path = embed_path(x, p, 1.0);
        CHECK(path(0.5) == doctest::Approx(1.0));
        CHECK(path(1.0) == doctest::Approx(0.0));
        CHECK(path(0.25) == doctest::Approx(0.5));

        // sup-distance oracle against the embedding of (1, 0): evaluate both
        // on a fine grid and take the largest absolute difference
        Vector x2(2);
        x2 << 1.0, 0.0;
        PiecewisePath other = embed_path(x2, p, 1.0);
        double brute = 0.0;
        for (int i = 0; i <= 4096; ++i) {
            double s = i / 4096.0;
            brute = std::max(brute, std::abs(path(s) - other(s)));
        }
        CHECK(brute == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(PiecewisePath::sup_distance(path, other) == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("constant after the stop time") {
        Vector x(2);
        x << 0.4, 0.8;
        PiecewisePath path = embed_path(x, p, 0.75);
        CHECK(path(0.0) == 0.0);
        CHECK(path(0.5) == doctest::Approx(0.4));
        CHECK(path(0.75) == doctest::Approx(1.2));
        CHECK(path(0.9) == doctest::Approx(1.2));
        CHECK(path(1.0) == doctest::Approx(1.2));
    }

    SUBCASE("domain errors") {
        Vector x = Vector::Zero(2);
        CHECK_THROWS_AS(embed_path(x, p, -0.1), DomainError);
        CHECK_THROWS_AS(embed_path(x, p, 1.1), DomainError);
        Vector bad = Vector::Zero(3);
        CHECK_THROWS_AS(embed_path(bad, p, 0.5), ShapeError);
    }
}

TEST_CASE("derivative ledger hand values") {
    // anchor: L^N = (L_phi + Lx/Ly) e^{s^2 Ly dT} - Lx/Ly
    SUBCASE("single interval, no x dependence") {
        VolatilityBand band(0.5, 1.0);
        TimePartition p = TimePartition::uniform(1, 1.0);
        DerivativeLedger lg = derivative_bound_ledger(1.0, 0.0, 1.0, band, p);
        CHECK(lg.bound(1) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
    }
    SUBCASE("degenerate lip_y") {
        VolatilityBand band(0.5, 1.0);
        TimePartition p = TimePartition::uniform(3, 1.0);
        DerivativeLedger lg = derivative_bound_ledger(2.0, 0.0, 0.0, band, p);
        for (double b : lg.bounds) CHECK(b == doctest::Approx(2.0));
        DerivativeLedger lg2 = derivative_bound_ledger(2.0, 1.5, 0.0, band, p);
        // limit form accumulates sigma_hi^2 * lip_x * dt per interval
        CHECK(lg2.bound(3) == doctest::Approx(2.0 + 1.5 / 3.0).epsilon(1e-12));
        CHECK(lg2.bound(1) == doctest::Approx(2.0 + 1.5).epsilon(1e-12));
    }
    SUBCASE("two uniform intervals, hand recurrence") {
        VolatilityBand band(0.5, 1.0);
        TimePartition p = TimePartition::uniform(2, 1.0);
        DerivativeLedger lg = derivative_bound_ledger(1.0, 1.0, 1.0, band, p);
        double l2 = 2.0 * std::exp(0.5) - 1.0;
        double l1 = (l2 + 1.0) * std::exp(0.5) - 1.0;
        CHECK(lg.bound(2) == doctest::Approx(l2).epsilon(1e-14));
        CHECK(lg.bound(1) == doctest::Approx(l1).epsilon(1e-14));
        CHECK(l2 == doctest::Approx(2.29744).epsilon(1e-5));
        CHECK(l1 == doctest::Approx(4.43656).epsilon(1e-5));
        CHECK(lg.m_z() == lg.bound(1));
        // monotone in the backward index
        CHECK(lg.bound(1) >= lg.bound(2));
    }
    SUBCASE("refinement invariance of L^1 when lip_x = 0") {
        VolatilityBand band(0.5, 1.2);
        TimePartition coarse = TimePartition::uniform(2, 1.0);
        TimePartition fine = coarse.refined(8);
        double l_coarse = derivative_bound_ledger(1.3, 0.0, 0.7, band, coarse).m_z();
        double l_fine = derivative_bound_ledger(1.3, 0.0, 0.7, band, fine).m_z();
        // the telescoped product is exp(s^2 Ly T) either way
        CHECK(l_coarse == doctest::Approx(1.3 * std::exp(1.44 * 0.7)).epsilon(1e-12));
        CHECK(l_fine == doctest::Approx(l_coarse).epsilon(1e-12));
    }
    SUBCASE("negative constants rejected") {
        VolatilityBand band(0.5, 1.0);
        TimePartition p = TimePartition::uniform(1, 1.0);
        CHECK_THROWS_AS(derivative_bound_ledger(-1.0, 0.0, 0.0, band, p), DomainError);
    }
}

TEST_CASE("discretized path driver") {
    TimePartition p = TimePartition::uniform(2, 1.0);

    SUBCASE("current-value driver reduces to the running sum") {
        PathGeneratorSpec h = make_path_generator("clamped-path", {});
        GeneratorSpec f = discretize_path_generator(h, p);
        Vector x(2);
        x << 0.3, 0.4;
        // inside interval 2 the embedded path has final value x1 + x2
        double direct = h.current_value.value()(0.8, 0.7, 0.0, 0.0);
        CHECK(f(0.8, x, 0.0, 0.0) == doctest::Approx(direct).epsilon(1e-14));
        // inside interval 1 only x1 counts, scaled to the live fraction
        CHECK(f(0.25, x, 0.0, 0.0) ==
              doctest::Approx(h.current_value.value()(0.25, 0.3, 0.0, 0.0)));
    }

    SUBCASE("constant driver is untouched") {
        PathGeneratorSpec h;
        h.eval = [](double, const PiecewisePath&, double, double) { return 4.2; };
        h.modulus = [](double) { return 0.0; };
        GeneratorSpec f = discretize_path_generator(h, p);
        Vector x(2);
        x << -1.0, 2.0;
        CHECK(f(0.3, x, 1.0, 2.0) == 4.2);
    }

    SUBCASE("modulus transfer on random increment pairs") {
        PathGeneratorSpec h = make_path_generator("clamped-path", {});
        GeneratorSpec f = discretize_path_generator(h, p);
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> uni(-2.0, 2.0);
        for (int i = 0; i < 100; ++i) {
            Vector a(2), b(2);
            a << uni(rng), uni(rng);
            b << uni(rng), uni(rng);
            double t = 0.5 * (uni(rng) + 2.0) / 2.0;
            double gap = std::abs(f(t, a, 0.0, 0.0) - f(t, b, 0.0, 0.0));
            double allowed = h.modulus((a - b).cwiseAbs().sum());
            CHECK(gap <= allowed + 1e-12);
        }
    }
}

TEST_CASE("generator and terminal sample checks") {
    GeneratorSpec f = make_generator("random-lipschitz", {{"seed", 3}}, 2);
    CHECK(sample_check_generator(f, 1.0, 3.0, 2.0, 2.0, 500, 42).empty());
    TerminalSpec phi = make_terminal("tanh", {}, 2);
    CHECK(sample_check_terminal(phi, 4.0, 500, 43).empty());

    SUBCASE("a wrong declaration is caught") {
        GeneratorSpec bad = f;
        bad.m0 = 0.0;  // the preset has a nonzero value at the origin
        CHECK_FALSE(sample_check_generator(bad, 1.0, 3.0, 2.0, 2.0, 500, 42).empty());
    }
}
