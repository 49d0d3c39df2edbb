#pragma once

#include "gbsde/generator.hpp"
#include "gbsde/grid.hpp"
#include "gbsde/types.hpp"

#include <functional>

namespace gbsde {

struct SolveOptions {
    double dt_max = 0.0;            // requested time step; 0 means "use the CFL bound"
    double cfl_safety = 0.4;        // dt <= cfl_safety * dx^2 / sigma_hi^2
    double store_stride_time = 0.0; // approximate spacing of stored rows; 0 stores all
};

/// Space-time solution of one parabolic sweep on [t_a, t_b]. Rows of u/du/d2u
/// correspond to the stored times (ascending); du and d2u are the
/// finite-difference derivatives of u. param_point carries the frozen earlier
/// increments when the solution is one slice of a cascade interval.
struct GridSolution {
    double t_a = 0.0, t_b = 0.0;
    SpaceGrid grid;
    std::vector<double> times;
    Matrix u, du, d2u;
    Vector param_point;

    struct Slice {
        double u, du, d2u;
    };
    /// Bilinear evaluation (linear in time between stored rows, linear in space).
    Slice eval(double t, double x) const;
    double value(double t, double x) const { return eval(t, x).u; }
    double dvalue(double t, double x) const { return eval(t, x).du; }
    double d2value(double t, double x) const { return eval(t, x).d2u; }
};

/// Driver already frozen to one spatial variable.
using Generator1d = std::function<double(double t, double x, double y, double z)>;

/// Forward initial-value march of du/dt = G(D^2 u [+ 2 f]) from data u0 at
/// t_start over `span`. Throws ConfigError on a CFL-violating requested step
/// and NumericError (with the step index) if the sweep produces non-finite
/// values.
GridSolution g_heat_march(const Array& u0, const VolatilityBand& band, double t_start, double span,
                          const SpaceGrid& grid, const SolveOptions& opt);

/// G-heat equation du/dt = G(D^2 u), u(0, .) = phi: u(t, x) approximates the
/// sublinear expectation of phi(x + sqrt(t) X) for X normal with variance
/// uncertainty in the band.
GridSolution solve_g_heat(const TerminalSpec& phi, const VolatilityBand& band, double horizon,
                          const SpaceGrid& grid, const SolveOptions& opt);
GridSolution solve_g_heat(const std::function<double(double)>& phi, const VolatilityBand& band,
                          double horizon, const SpaceGrid& grid, const SolveOptions& opt);

/// Backward terminal-value problem du/dt + G(D^2 u + 2 f(t, x, u, Du)) = 0 on
/// [t_a, t_b] with u(t_b, .) = terminal. Du in the driver argument is the
/// centered difference of the current time level.
GridSolution solve_generator_pde(const Generator1d& f, const std::function<double(double)>& terminal,
                                 const VolatilityBand& band, double t_a, double t_b,
                                 const SpaceGrid& grid, const SolveOptions& opt);

/// Centered differences in the interior, one-sided second-order stencils at
/// the two boundary nodes, row by row.
std::pair<Matrix, Matrix> extract_derivatives(const Matrix& u, double dx);
std::pair<Matrix, Matrix> extract_derivatives(const GridSolution& sol);

/// Conditional sublinear expectation of a cylinder functional, reduced to a
/// function of the first `level` increments by backward recursion of G-heat
/// sweeps with earlier increments frozen on a parameter tensor grid.
struct ConditionalExpectation {
    int level = 0;
    TensorValues values;

    double scalar() const {
        if (level != 0) throw DomainError("ConditionalExpectation::scalar: level > 0");
        return values.data()[0];
    }
    double operator()(Eigen::Ref<const Vector> x) const { return values.interpolate(x); }
};

struct ConditionalOptions {
    SpaceGrid grid;
    int param_nodes = 21;  // parameter axes reuse the grid's range
    SolveOptions solve;
};

ConditionalExpectation conditional_g_expectation(const TerminalSpec& phi,
                                                 const TimePartition& partition, int level,
                                                 const VolatilityBand& band,
                                                 const ConditionalOptions& opt);

}  // namespace gbsde
