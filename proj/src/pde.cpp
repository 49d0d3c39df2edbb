#include "gbsde/pde.hpp"

#include "gbsde/gfunction.hpp"

#include <algorithm>
#include <cmath>

namespace gbsde {

namespace {

Array first_derivative_row(const Array& u, double dx) {
    const long m = u.size();
    Array du(m);
    du.segment(1, m - 2) = (u.tail(m - 2) - u.head(m - 2)) / (2.0 * dx);
    du[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dx);
    du[m - 1] = (3.0 * u[m - 1] - 4.0 * u[m - 2] + u[m - 3]) / (2.0 * dx);
    return du;
}

// March du/dt = G(D^2 u + 2 f) in the direction of increasing `s` steps; the
// physical time of the known row is t_start + dir * s * dt. The boundary rule
// is linear extrapolation: the second difference is forced to zero at the two
// boundary nodes.
GridSolution march(const Array& u0, const VolatilityBand& band, double t_start, double span,
                   int dir, const Generator1d* f, const SpaceGrid& grid, const SolveOptions& opt) {
    if (!(span > 0.0)) throw DomainError("pde march: span must be positive");
    if (u0.size() != grid.m) throw ShapeError("pde march: initial data does not match the grid");
    const double dx = grid.dx();
    const double cfl = opt.cfl_safety * dx * dx / band.hi2();
    double dt_req = opt.dt_max > 0.0 ? opt.dt_max : cfl;
    if (dt_req > cfl * (1.0 + 1e-12))
        throw ConfigError("pde march: requested dt " + std::to_string(dt_req) +
                          " violates the CFL bound " + std::to_string(cfl));
    const long steps = std::max<long>(1, static_cast<long>(std::ceil(span / dt_req - 1e-12)));
    const double dt = span / static_cast<double>(steps);
    long stride = 1;
    if (opt.store_stride_time > 0.0)
        stride = std::max<long>(1, static_cast<long>(std::llround(opt.store_stride_time / dt)));

    const long m = grid.m;
    Array u = u0;
    Array d2(m), arg(m);
    std::vector<double> times;
    std::vector<Array> rows;
    times.push_back(t_start);
    rows.push_back(u);

    for (long s = 0; s < steps; ++s) {
        const double t_cur = t_start + dir * static_cast<double>(s) * dt;
        d2.segment(1, m - 2) =
            (u.head(m - 2) - 2.0 * u.segment(1, m - 2) + u.tail(m - 2)) / (dx * dx);
        d2[0] = 0.0;
        d2[m - 1] = 0.0;
        if (f) {
            Array du = first_derivative_row(u, dx);
            for (long i = 0; i < m; ++i)
                arg[i] = d2[i] + 2.0 * (*f)(t_cur, grid.node(static_cast<int>(i)), u[i], du[i]);
        } else {
            arg = d2;
        }
        u += dt * g_function(arg, band);
        if (!u.allFinite())
            throw NumericError("pde march: non-finite value after step " + std::to_string(s + 1) +
                               " of " + std::to_string(steps));
        if ((s + 1) % stride == 0 || s + 1 == steps) {
            times.push_back(t_start + dir * static_cast<double>(s + 1) * dt);
            rows.push_back(u);
        }
    }

    GridSolution sol;
    sol.grid = grid;
    if (dir > 0) {
        sol.t_a = t_start;
        sol.t_b = t_start + span;
    } else {
        sol.t_a = t_start - span;
        sol.t_b = t_start;
        std::reverse(times.begin(), times.end());
        std::reverse(rows.begin(), rows.end());
    }
    sol.times = std::move(times);
    const long nrows = static_cast<long>(rows.size());
    sol.u.resize(nrows, m);
    for (long r = 0; r < nrows; ++r) sol.u.row(r) = rows[static_cast<std::size_t>(r)].transpose();
    std::tie(sol.du, sol.d2u) = extract_derivatives(sol.u, dx);
    return sol;
}

}  // namespace

GridSolution g_heat_march(const Array& u0, const VolatilityBand& band, double t_start, double span,
                          const SpaceGrid& grid, const SolveOptions& opt) {
    return march(u0, band, t_start, span, +1, nullptr, grid, opt);
}

GridSolution solve_g_heat(const TerminalSpec& phi, const VolatilityBand& band, double horizon,
                          const SpaceGrid& grid, const SolveOptions& opt) {
    if (phi.num_increments != 1)
        throw ShapeError("solve_g_heat: terminal must be a function of one variable");
    Array u0(grid.m);
    Vector x(1);
    for (int i = 0; i < grid.m; ++i) {
        x[0] = grid.node(i);
        u0[i] = phi(x);
    }
    return g_heat_march(u0, band, 0.0, horizon, grid, opt);
}

GridSolution solve_g_heat(const std::function<double(double)>& phi, const VolatilityBand& band,
                          double horizon, const SpaceGrid& grid, const SolveOptions& opt) {
    Array u0(grid.m);
    for (int i = 0; i < grid.m; ++i) u0[i] = phi(grid.node(i));
    return g_heat_march(u0, band, 0.0, horizon, grid, opt);
}

GridSolution solve_generator_pde(const Generator1d& f,
                                 const std::function<double(double)>& terminal,
                                 const VolatilityBand& band, double t_a, double t_b,
                                 const SpaceGrid& grid, const SolveOptions& opt) {
    if (!(t_a < t_b)) throw DomainError("solve_generator_pde: need t_a < t_b");
    Array u0(grid.m);
    for (int i = 0; i < grid.m; ++i) u0[i] = terminal(grid.node(i));
    if (!f) return march(u0, band, t_b, t_b - t_a, -1, nullptr, grid, opt);
    Generator1d wrapped = [&f](double t, double x, double y, double z) {
        try {
            return f(t, x, y, z);
        } catch (const std::exception& e) {
            throw NumericError(std::string("driver evaluation failed: ") + e.what());
        }
    };
    return march(u0, band, t_b, t_b - t_a, -1, &wrapped, grid, opt);
}

std::pair<Matrix, Matrix> extract_derivatives(const Matrix& u, double dx) {
    const long rows = u.rows(), m = u.cols();
    Matrix du(rows, m), d2u(rows, m);
    du.block(0, 1, rows, m - 2) =
        (u.block(0, 2, rows, m - 2) - u.block(0, 0, rows, m - 2)) / (2.0 * dx);
    du.col(0) = (-3.0 * u.col(0) + 4.0 * u.col(1) - u.col(2)) / (2.0 * dx);
    du.col(m - 1) = (3.0 * u.col(m - 1) - 4.0 * u.col(m - 2) + u.col(m - 3)) / (2.0 * dx);
    d2u.block(0, 1, rows, m - 2) =
        (u.block(0, 0, rows, m - 2) - 2.0 * u.block(0, 1, rows, m - 2) +
         u.block(0, 2, rows, m - 2)) /
        (dx * dx);
    d2u.col(0) = (2.0 * u.col(0) - 5.0 * u.col(1) + 4.0 * u.col(2) - u.col(3)) / (dx * dx);
    d2u.col(m - 1) =
        (2.0 * u.col(m - 1) - 5.0 * u.col(m - 2) + 4.0 * u.col(m - 3) - u.col(m - 4)) / (dx * dx);
    return {du, d2u};
}

std::pair<Matrix, Matrix> extract_derivatives(const GridSolution& sol) {
    return extract_derivatives(sol.u, sol.grid.dx());
}

GridSolution::Slice GridSolution::eval(double t, double x) const {
    const double slack = 1e-9 * std::max(1.0, std::abs(t_b));
    if (t < t_a - slack || t > t_b + slack)
        throw DomainError("GridSolution::eval: t = " + std::to_string(t) + " outside [" +
                          std::to_string(t_a) + ", " + std::to_string(t_b) + "]");
    t = std::clamp(t, times.front(), times.back());
    auto it = std::upper_bound(times.begin(), times.end(), t);
    long r1 = std::min<long>(static_cast<long>(it - times.begin()),
                             static_cast<long>(times.size()) - 1);
    long r0 = std::max<long>(r1 - 1, 0);
    double wt = 0.0;
    if (r1 > r0) wt = (t - times[static_cast<std::size_t>(r0)]) /
                      (times[static_cast<std::size_t>(r1)] - times[static_cast<std::size_t>(r0)]);
    auto [i, wx] = grid.locate(x);
    auto bilin = [&](const Matrix& mtx) {
        double lo = mtx(r0, i) * (1.0 - wx) + mtx(r0, i + 1) * wx;
        double hi = mtx(r1, i) * (1.0 - wx) + mtx(r1, i + 1) * wx;
        return lo * (1.0 - wt) + hi * wt;
    };
    return {bilin(u), bilin(du), bilin(d2u)};
}

ConditionalExpectation conditional_g_expectation(const TerminalSpec& phi,
                                                 const TimePartition& partition, int level,
                                                 const VolatilityBand& band,
                                                 const ConditionalOptions& opt) {
    const int n = partition.intervals();
    if (phi.num_increments != n)
        throw ShapeError("conditional_g_expectation: terminal expects " +
                         std::to_string(phi.num_increments) + " increments, partition has " +
                         std::to_string(n));
    if (level < 0 || level > n)
        throw DomainError("conditional_g_expectation: level must lie in [0, N]");

    const SpaceGrid space = opt.grid;
    const SpaceGrid param(space.x_min, space.x_max, opt.param_nodes);
    // frozen coordinates live on coarse parameter axes except the most recent
    // one, which stays on the fine grid: it is the next sweep's variable
    auto frozen_axes = [&](int count) {
        std::vector<SpaceGrid> axes;
        if (count > 0) {
            axes.assign(static_cast<std::size_t>(count - 1), param);
            axes.push_back(space);
        }
        return axes;
    };

    if (level == n) {
        TensorValues v(frozen_axes(n));
        for (long p = 0; p < v.size(); ++p) {
            Vector pt = v.point(p);
            v.data()[p] = phi(pt);
        }
        return {level, std::move(v)};
    }

    SolveOptions inner = opt.solve;
    inner.store_stride_time = partition.horizon();  // only the final row is needed

    TensorValues prev;  // r_{j+1}: values over (x_1 .. x_j) on frozen_axes(j)
    for (int j = n; j > level; --j) {
        const double span = partition.gap(j);
        TensorValues frozen(frozen_axes(j - 1));
        const long combos = frozen.size();
        Array u0(space.m);
        Vector full(j);
        for (long c = 0; c < combos; ++c) {
            Vector q = frozen.point(c);
            full.head(j - 1) = q;
            if (j == n) {
                Vector args(n);
                args.head(j - 1) = q;
                for (int i = 0; i < space.m; ++i) {
                    args[j - 1] = space.node(i);
                    u0[i] = phi(args);
                }
            } else {
                for (int i = 0; i < space.m; ++i) {
                    full[j - 1] = space.node(i);
                    u0[i] = prev.interpolate(full);
                }
            }
            GridSolution sol = g_heat_march(u0, band, 0.0, span, space, inner);
            frozen.data()[c] = sol.value(span, 0.0);
        }
        prev = std::move(frozen);
    }
    return {level, std::move(prev)};
}

}  // namespace gbsde
