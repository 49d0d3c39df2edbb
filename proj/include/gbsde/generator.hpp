#pragma once

#include "gbsde/types.hpp"

#include <functional>
#include <optional>

namespace gbsde {

/// Which arguments a driver actually reads. Declared alongside the Lipschitz
/// constants; mollification skips axes a driver is constant in.
struct DependencyMask {
    bool t = true;
    bool x = true;
    bool y = true;
    bool z = true;
};

/// Driver f(t, x_1..x_N, y, z) with its declared constants: |f(t,x,0,0)| <= m0,
/// Lipschitz lip_y in y, local-Lipschitz coefficient lip_z in z (slope
/// lip_z*(1+|z1|+|z2|)), Lipschitz lip_x in each x_i, and a concave sub-additive
/// modulus of continuity in (t, x). Constants are declared, never inferred.
struct GeneratorSpec {
    int num_increments = 0;  // N
    std::function<double(double, Eigen::Ref<const Vector>, double, double)> eval;
    double m0 = 0.0;
    double lip_y = 0.0;
    double lip_z = 0.0;
    double lip_x = 0.0;
    std::function<double(double)> modulus;  // w(delta), w(0) = 0
    DependencyMask deps;

    double operator()(double t, Eigen::Ref<const Vector> x, double y, double z) const {
        return eval(t, x, y, z);
    }
};

/// Terminal value phi(x_1..x_N) with |phi| <= bound and Lipschitz constant
/// w.r.t. the l1 distance of the increment vectors.
struct TerminalSpec {
    int num_increments = 1;
    std::function<double(Eigen::Ref<const Vector>)> phi;
    double bound = 0.0;
    double lipschitz = 0.0;
    /// When phi(x) = g(sum_i x_i), the sum form enables the running-sum cascade.
    std::optional<std::function<double(double)>> sum_form;

    double operator()(Eigen::Ref<const Vector> x) const { return phi(x); }
};

/// Piecewise-linear path on [0, horizon], constant after stop_time.
struct PiecewisePath {
    std::vector<double> knot_t;  // strictly increasing, starts at 0
    std::vector<double> knot_v;  // values at the knots
    double stop_time = 0.0;
    double horizon = 0.0;

    double operator()(double s) const;
    double final_value() const { return knot_v.back(); }
    /// sup_{s in [0, horizon]} |a(s) - b(s)| for two paths sharing the horizon,
    /// exact for piecewise-linear inputs (evaluated at merged knots).
    static double sup_distance(const PiecewisePath& a, const PiecewisePath& b);
};

/// Piecewise-linear path through the cumulative increment sums, stopped at t:
/// the knots carry sum_{j<=i} x_j for completed intervals, the live segment
/// rises linearly on [t_{k-1}, t] to sum_{j<=k} x_j, and the path is constant
/// on [t, horizon]. Throws DomainError for t outside [0, horizon].
PiecewisePath embed_path(Eigen::Ref<const Vector> x, const TimePartition& partition, double t);

/// Path-dependent driver h(t, omega_{. ^ t}, y, z) with modulus w^h in
/// (|t1-t2| + sup-norm of the path gap).
struct PathGeneratorSpec {
    std::function<double(double, const PiecewisePath&, double, double)> eval;
    double m0 = 0.0;
    double lip_y = 0.0;
    double lip_z = 0.0;
    std::function<double(double)> modulus;
    DependencyMask deps;
    /// Set when h(t, omega, y, z) reads the path only through omega(t).
    /// current_value(t, v, y, z) must then equal eval on any path with
    /// omega(t) = v.
    std::optional<std::function<double(double, double, double, double)>> current_value;
};

/// Freeze a path driver onto a partition: the returned generator evaluates h on
/// the embedded stopped path of its increment argument. Inherits the modulus
/// through |f(t,x1,..) - f(t,x2,..)| <= w^h(sum_k |x1_k - x2_k|).
GeneratorSpec discretize_path_generator(const PathGeneratorSpec& h, const TimePartition& partition);

/// Driver whose x-dependence factors through the running sum s = sum_{j<=k} x_j.
/// This is exact for current-value path drivers and collapses the cascade onto
/// a single spatial variable.
struct ReducedGenerator {
    std::function<double(double, double, double, double)> eval;  // (t, s, y, z)
    double m0 = 0.0;
    double lip_y = 0.0;
    double lip_z = 0.0;
    double lip_s = 0.0;
    std::function<double(double)> modulus;
    DependencyMask deps;  // deps.x refers to the s coordinate

    double operator()(double t, double s, double y, double z) const { return eval(t, s, y, z); }
};

/// Running-sum form of a discretized path driver; available exactly when the
/// driver declares current-value dependence.
std::optional<ReducedGenerator> reduce_to_running_sum(const PathGeneratorSpec& h);

/// Sampled validation of declared generator constants. Returns a human-readable
/// violation message or empty when all sampled checks pass.
std::string sample_check_generator(const GeneratorSpec& f, double horizon, double x_radius,
                                   double y_radius, double z_radius, int samples, uint64_t seed);

std::string sample_check_terminal(const TerminalSpec& phi, double x_radius, int samples,
                                  uint64_t seed);

}  // namespace gbsde
