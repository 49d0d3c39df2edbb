#include "gbsde/cascade.hpp"

#include "gbsde/gfunction.hpp"
#include "gbsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace gbsde {

namespace {

SolveOptions effective_options(const CascadeConfig& config, double horizon) {
    SolveOptions opt = config.solve;
    if (opt.store_stride_time == 0.0) opt.store_stride_time = horizon / 256.0;
    return opt;
}

double y_ceiling(double m0, double lip_y, const VolatilityBand& band, double horizon) {
    return m0 * (1.0 + band.hi2() * horizon) * std::exp(band.hi2() * lip_y * horizon);
}

GeneratorSpec truncated(const GeneratorSpec& f, double m_z) {
    if (m_z <= 0.0 || !f.deps.z) return f;
    GeneratorSpec g = f;
    auto base = f.eval;
    g.eval = [base, m_z](double t, Eigen::Ref<const Vector> x, double y, double z) {
        return base(t, x, y, std::clamp(z, -m_z, m_z));
    };
    return g;
}

ReducedGenerator truncated(const ReducedGenerator& f, double m_z) {
    if (m_z <= 0.0 || !f.deps.z) return f;
    ReducedGenerator g = f;
    auto base = f.eval;
    g.eval = [base, m_z](double t, double s, double y, double z) {
        return base(t, s, y, std::clamp(z, -m_z, m_z));
    };
    return g;
}

}  // namespace

double CascadeSolution::y0() const {
    Vector b1 = Vector::Zero(1);
    return eval(1, 0.0, b1).u;
}

GridSolution::Slice CascadeSolution::eval(int k, double t, Eigen::Ref<const Vector> bk) const {
    const auto& interval = intervals.at(static_cast<std::size_t>(k) - 1);
    if (bk.size() != k) throw ShapeError("CascadeSolution::eval: B^k must have k entries");
    const double x = bk[k - 1];
    if (interval.param_axes.empty()) return interval.slices[0].eval(t, x);
    MultilinearStencil st =
        multilinear_stencil(interval.param_axes, interval.strides, bk.head(k - 1));
    GridSolution::Slice out{0.0, 0.0, 0.0};
    for (std::size_t c = 0; c < st.corners.size(); ++c) {
        GridSolution::Slice s =
            interval.slices[static_cast<std::size_t>(st.corners[c])].eval(t, x);
        out.u += st.weights[c] * s.u;
        out.du += st.weights[c] * s.du;
        out.d2u += st.weights[c] * s.d2u;
    }
    return out;
}

CascadeSolution solve_cascade(const GeneratorSpec& f, const TerminalSpec& phi,
                              const TimePartition& partition, const VolatilityBand& band,
                              const CascadeConfig& config) {
    const int n = partition.intervals();
    if (f.num_increments != n || phi.num_increments != n)
        throw ShapeError("solve_cascade: driver/terminal increment count must match the partition");

    DerivativeLedger ledger = derivative_bound_ledger(phi.lipschitz, f.lip_x, f.lip_y, band,
                                                      partition);
    CascadeSolution cas(partition, band, ledger);
    cas.m_z = ledger.m_z() * (config.z_trunc_factor > 0.0 ? config.z_trunc_factor : 1.0);
    cas.generator = config.z_trunc_factor > 0.0 ? truncated(f, cas.m_z) : f;
    cas.m_y = y_ceiling(f.m0 + phi.bound, f.lip_y, band, partition.horizon());
    cas.intervals.resize(static_cast<std::size_t>(n));

    const SpaceGrid space = config.grid;
    const SpaceGrid param(space.x_min, space.x_max, config.param_nodes);
    const SolveOptions opt = effective_options(config, partition.horizon());

    // stitched terminal values of the interval solved previously (k+1),
    // tabulated over its parameter combinations at x_{k+1} = 0
    TensorValues stitched;

    for (int k = n; k >= 1; --k) {
        auto& interval = cas.intervals[static_cast<std::size_t>(k) - 1];
        interval.param_axes.assign(static_cast<std::size_t>(k - 1), param);
        interval.strides.resize(static_cast<std::size_t>(k - 1));
        long combos = 1;
        for (int a = k - 2; a >= 0; --a) {
            interval.strides[static_cast<std::size_t>(a)] = combos;
            combos *= param.m;
        }
        interval.slices.resize(static_cast<std::size_t>(combos));

        TensorValues index_helper(interval.param_axes);
        const double t_a = partition.time(k - 1), t_b = partition.time(k);
        const auto& eff = cas.generator;
        const TensorValues& prev = stitched;

        parallel_for(combos, [&](long c) {
            Vector p = index_helper.point(c);
            Vector args = Vector::Zero(n);
            args.head(k - 1) = p;

            std::function<double(double)> terminal;
            if (k == n) {
                terminal = [&phi, p, k, n](double x) {
                    Vector full = Vector::Zero(n);
                    full.head(k - 1) = p;
                    full[k - 1] = x;
                    return phi(full);
                };
            } else {
                terminal = [&prev, p, k](double x) {
                    Vector q(k);
                    q.head(k - 1) = p;
                    q[k - 1] = x;
                    return prev.interpolate(q);
                };
            }
            Generator1d f1d = [&eff, args, k](double t, double x, double y, double z) mutable {
                args[k - 1] = x;
                return eff(t, args, y, z);
            };
            GridSolution sol;
            try {
                sol = solve_generator_pde(f1d, terminal, cas.band, t_a, t_b, config.grid, opt);
            } catch (const NumericError& e) {
                throw NumericError("interval " + std::to_string(k) + ": " + e.what());
            } catch (const ConfigError& e) {
                throw ConfigError("interval " + std::to_string(k) + ": " + e.what());
            }
            sol.param_point = p;
            interval.slices[static_cast<std::size_t>(c)] = std::move(sol);
        });

        if (k > 1) {
            // tabulate u^k(t_{k-1}, ., 0) over this interval's parameter grid
            // for the next stitch
            TensorValues next(interval.param_axes);
            for (long c = 0; c < combos; ++c)
                next.data()[c] = interval.slices[static_cast<std::size_t>(c)].value(t_a, 0.0);
            stitched = std::move(next);
        }
    }
    return cas;
}

ReducedCascade solve_cascade_reduced(const ReducedGenerator& f,
                                     const std::function<double(double)>& terminal_sum,
                                     double terminal_bound, double terminal_lip,
                                     const TimePartition& partition, const VolatilityBand& band,
                                     const CascadeConfig& config) {
    DerivativeLedger ledger =
        derivative_bound_ledger(terminal_lip, f.lip_s, f.lip_y, band, partition);
    ReducedCascade cas{partition, band, ledger, f, {}, 0.0, 0.0};
    cas.m_z = ledger.m_z() * (config.z_trunc_factor > 0.0 ? config.z_trunc_factor : 1.0);
    cas.generator = config.z_trunc_factor > 0.0 ? truncated(f, cas.m_z) : f;
    cas.m_y = y_ceiling(f.m0 + terminal_bound, f.lip_y, band, partition.horizon());

    const auto& eff = cas.generator;
    Generator1d f1d = [&eff](double t, double s, double y, double z) {
        return eff(t, s, y, z);
    };
    // the x_{k+1} = 0 stitch is the identity in the running sum, so the whole
    // cascade is one backward sweep
    cas.solution = solve_generator_pde(f1d, terminal_sum, band, 0.0, partition.horizon(),
                                       config.grid, effective_options(config, partition.horizon()));
    return cas;
}

namespace {

// Per grid point state used by both path builders.
struct PointEval {
    double y, z, eta;  // eta = d2u/2 + f
};

template <typename EvalFn>
std::optional<SolutionTriplePaths::PathTriple> build_one_path(
    const ScenarioPath& path, const TimePartition& partition, const VolatilityBand& band,
    EvalFn&& point, int member, int index, double& worst_y,
    SolutionTriplePaths::Rejection& rejection) {
    const long n = path.t.size();
    SolutionTriplePaths::PathTriple out;
    out.member = member;
    out.index = index;
    out.b = path.b;
    out.qv = path.qv;
    out.y.resize(n);
    out.z.resize(n);
    out.k.resize(n);
    out.k[0] = 0.0;

    PointEval left{};
    int left_interval = -1;
    for (long j = 0; j < n; ++j) {
        const double t = path.t[j];
        const int k = j == 0 ? 1 : partition.interval_of(t);
        std::optional<PointEval> pe = point(k, t, j);
        if (!pe) {
            rejection = {member, index, t};
            return std::nullopt;
        }
        out.y[j] = pe->y;
        out.z[j] = pe->z;
        worst_y = std::max(worst_y, std::abs(pe->y));
        if (j > 0) {
            // re-evaluate the left endpoint under this step's interval when a
            // partition knot was crossed
            if (left_interval != k) {
                std::optional<PointEval> pl = point(k, path.t[j - 1], j - 1);
                if (!pl) {
                    rejection = {member, index, path.t[j - 1]};
                    return std::nullopt;
                }
                left = *pl;
            }
            const double dqv = path.qv[j] - path.qv[j - 1];
            const double dt = path.t[j] - path.t[j - 1];
            out.k[j] = out.k[j - 1] + 0.5 * (left.eta + pe->eta) * dqv -
                       (g_function(left.eta, band) + g_function(pe->eta, band)) * dt;
        }
        left = *pe;
        left_interval = k;
    }
    return out;
}

template <typename PathEvalFactory>
SolutionTriplePaths build_paths_impl(const TimePartition& partition, const VolatilityBand& band,
                                     double m_y, double m_z,
                                     const std::vector<ScenarioPath>& sims,
                                     PathEvalFactory&& factory) {
    if (sims.empty()) throw ShapeError("build_solution_paths: no scenario paths supplied");
    const double dt = sims.front().dt;
    // the scenario grid must refine the partition
    for (double knot : partition.times()) {
        double steps = knot / dt;
        if (std::abs(steps - std::round(steps)) > 1e-9)
            throw ConfigError("build_solution_paths: scenario dt must refine the partition knots");
    }

    SolutionTriplePaths out;
    out.m_y = m_y;
    out.m_z = m_z;
    out.times = sims.front().t;

    struct Slot {
        std::optional<SolutionTriplePaths::PathTriple> triple;
        SolutionTriplePaths::Rejection rejection;
        double worst_y = 0.0;
    };
    const long total = static_cast<long>(sims.size());
    std::vector<Slot> slots(static_cast<std::size_t>(total));
    std::vector<int> index_in_member(static_cast<std::size_t>(total));
    {
        std::map<int, int> counters;
        for (long i = 0; i < total; ++i)
            index_in_member[static_cast<std::size_t>(i)] =
                counters[sims[static_cast<std::size_t>(i)].control_index]++;
    }

    parallel_for(total, [&](long i) {
        const ScenarioPath& path = sims[static_cast<std::size_t>(i)];
        if (path.t.size() != sims.front().t.size())
            throw ShapeError("build_solution_paths: paths use different time grids");
        auto point = factory(path);
        Slot& slot = slots[static_cast<std::size_t>(i)];
        slot.triple = build_one_path(path, partition, band, point, path.control_index,
                                     index_in_member[static_cast<std::size_t>(i)], slot.worst_y,
                                     slot.rejection);
    });

    double worst_y = 0.0;
    for (auto& slot : slots) {
        worst_y = std::max(worst_y, slot.worst_y);
        if (slot.triple)
            out.paths.push_back(std::move(*slot.triple));
        else
            out.rejections.push_back(slot.rejection);
    }
    out.y_bound_warning = worst_y > m_y;
    if (out.paths.empty())
        throw RangeError("build_solution_paths: every path left the spatial grid");
    return out;
}

}  // namespace

SolutionTriplePaths build_solution_paths(const CascadeSolution& cascade,
                                         const ScenarioFamily& family) {
    return build_solution_paths(cascade, simulate_family(family));
}

SolutionTriplePaths build_solution_paths(const ReducedCascade& cascade,
                                         const ScenarioFamily& family) {
    return build_solution_paths(cascade, simulate_family(family));
}

SolutionTriplePaths build_solution_paths(const CascadeSolution& cascade,
                                         const std::vector<ScenarioPath>& sims) {
    const int n = cascade.partition.intervals();
    const SpaceGrid& space = cascade.intervals.front().slices.front().grid;

    auto factory = [&](const ScenarioPath& path) {
        return [&cascade, &path, n, &space](int k, double t, long j) -> std::optional<PointEval> {
            Vector bk(k);
            for (int i = 1; i < k; ++i) {
                double knot_prev = cascade.partition.time(i - 1);
                double knot = cascade.partition.time(i);
                long j_prev = static_cast<long>(std::llround(knot_prev / path.dt));
                long j_cur = static_cast<long>(std::llround(knot / path.dt));
                bk[i - 1] = path.b[j_cur] - path.b[j_prev];
            }
            long j_left =
                static_cast<long>(std::llround(cascade.partition.time(k - 1) / path.dt));
            bk[k - 1] = path.b[j] - path.b[j_left];
            for (int i = 0; i < k; ++i)
                if (!space.covers(bk[i])) return std::nullopt;

            GridSolution::Slice s = cascade.eval(k, t, bk);
            Vector args = Vector::Zero(n);
            args.head(k) = bk;
            double fv = cascade.generator(t, args, s.u, s.du);
            return PointEval{s.u, s.du, 0.5 * s.d2u + fv};
        };
    };
    return build_paths_impl(cascade.partition, cascade.band, cascade.m_y, cascade.m_z, sims,
                            factory);
}

SolutionTriplePaths build_solution_paths(const ReducedCascade& cascade,
                                         const std::vector<ScenarioPath>& sims) {
    const SpaceGrid& space = cascade.solution.grid;
    auto factory = [&](const ScenarioPath& path) {
        return [&cascade, &path, &space](int, double t, long j) -> std::optional<PointEval> {
            double s = path.b[j];
            if (!space.covers(s)) return std::nullopt;
            GridSolution::Slice sl = cascade.solution.eval(t, s);
            double fv = cascade.generator(t, s, sl.u, sl.du);
            return PointEval{sl.u, sl.du, 0.5 * sl.d2u + fv};
        };
    };
    return build_paths_impl(cascade.partition, cascade.band, cascade.m_y, cascade.m_z, sims,
                            factory);
}

namespace {

template <typename DriverAt>
ResidualStats residual_impl(const SolutionTriplePaths& paths, const TimePartition& partition,
                            DriverAt&& driver_at) {
    ResidualStats stats;
    const long n = paths.times.size();
    for (const auto& path : paths.paths) {
        Array f_vals(n);
        for (long j = 0; j < n; ++j) {
            int k = j == 0 ? 1 : partition.interval_of(paths.times[j]);
            f_vals[j] = driver_at(path, k, j);
        }
        // suffix discrete integrals, left endpoints
        double int_f = 0.0, int_z = 0.0;
        double max_abs = 0.0;
        bool finite = true;
        const double y_last = path.y[n - 1];
        const double k_last = path.k[n - 1];
        for (long j = n - 1; j >= 0; --j) {
            if (j < n - 1) {
                int_f += f_vals[j] * (path.qv[j + 1] - path.qv[j]);
                int_z += path.z[j] * (path.b[j + 1] - path.b[j]);
            }
            double r = path.y[j] - (y_last + int_f - int_z - (k_last - path.k[j]));
            if (!std::isfinite(r)) {
                finite = false;
                break;
            }
            max_abs = std::max(max_abs, std::abs(r));
        }
        if (!finite) {
            ++stats.non_finite_paths;
            continue;
        }
        stats.per_path.push_back({path.member, path.index, max_abs});
        stats.max_abs = std::max(stats.max_abs, max_abs);
    }
    return stats;
}

}  // namespace

ResidualStats residual_check(const SolutionTriplePaths& paths, const CascadeSolution& cascade) {
    const int n = cascade.partition.intervals();
    return residual_impl(
        paths, cascade.partition,
        [&](const SolutionTriplePaths::PathTriple& path, int k, long j) {
            Vector args = Vector::Zero(n);
            double left = path.b[static_cast<long>(
                std::llround(cascade.partition.time(k - 1) / (paths.times[1] - paths.times[0])))];
            for (int i = 1; i < k; ++i) {
                double t0 = cascade.partition.time(i - 1), t1 = cascade.partition.time(i);
                double dt = paths.times[1] - paths.times[0];
                args[i - 1] = path.b[static_cast<long>(std::llround(t1 / dt))] -
                              path.b[static_cast<long>(std::llround(t0 / dt))];
            }
            args[k - 1] = path.b[j] - left;
            return cascade.generator(paths.times[j], args, path.y[j], path.z[j]);
        });
}

ResidualStats residual_check(const SolutionTriplePaths& paths, const ReducedCascade& cascade) {
    return residual_impl(paths, cascade.partition,
                         [&](const SolutionTriplePaths::PathTriple& path, int, long j) {
                             return cascade.generator(paths.times[j], path.b[j], path.y[j],
                                                      path.z[j]);
                         });
}

}  // namespace gbsde
