#include "gbsde/analysis.hpp"

#include "gbsde/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace gbsde {

ZPaths z_paths_from(const SolutionTriplePaths& paths, const ScenarioFamily& family) {
    ZPaths out;
    out.times = paths.times;
    out.rows.reserve(paths.paths.size());
    for (const auto& p : paths.paths) out.rows.push_back({p.member, p.b, p.qv, p.z});
    for (const auto& m : family.members) out.control_labels.push_back(m.control.label());
    return out;
}

ZPaths z_paths_constant(const ScenarioFamily& family, double z) {
    ZPaths out;
    bool first = true;
    for_each_path(family, [&](const ScenarioPath& path, int member, int) {
        if (first) {
            out.times = path.t;
            first = false;
        }
        out.rows.push_back({member, path.b, path.qv, Array::Constant(path.t.size(), z)});
    });
    for (const auto& m : family.members) out.control_labels.push_back(m.control.label());
    return out;
}

BmoEstimate bmo_norm(const ZPaths& z, const std::vector<double>& eval_times, int buckets,
                     int min_bucket_paths) {
    if (z.rows.empty()) throw ShapeError("bmo_norm: no Z paths supplied");
    if (buckets < 1) throw DomainError("bmo_norm: need at least one bucket");
    BmoEstimate est;
    est.eval_times = eval_times;
    est.buckets = buckets;

    const long n = z.times.size();
    const double horizon = z.times[n - 1];
    int members = 0;
    for (const auto& r : z.rows) members = std::max(members, r.member + 1);

    for (int m = 0; m < members; ++m) {
        std::vector<const ZPaths::Row*> rows;
        for (const auto& r : z.rows)
            if (r.member == m) rows.push_back(&r);
        if (rows.empty()) continue;
        BmoEstimate::PerControl pc;
        pc.label = m < static_cast<int>(z.control_labels.size()) ? z.control_labels[m]
                                                                 : std::to_string(m);
        for (double tau : eval_times) {
            if (tau < 0.0 || tau > horizon)
                throw DomainError("bmo_norm: evaluation time outside the horizon");
            long j_tau = static_cast<long>(std::llround(tau / (z.times[1] - z.times[0])));
            j_tau = std::min(j_tau, n - 1);
            // tail energy int_tau^T Z^2 d<B> per path
            std::vector<std::pair<double, double>> state_tail;  // (B_tau, tail)
            state_tail.reserve(rows.size());
            for (const auto* r : rows) {
                double tail = 0.0;
                for (long j = j_tau; j + 1 < n; ++j)
                    tail += r->z[j] * r->z[j] * (r->qv[j + 1] - r->qv[j]);
                state_tail.emplace_back(r->b[j_tau], tail);
            }
            std::sort(state_tail.begin(), state_tail.end());
            const long count = static_cast<long>(state_tail.size());
            const int used_buckets = j_tau == 0 ? 1 : buckets;  // B_0 = 0 for every path
            double worst = 0.0;
            for (int bkt = 0; bkt < used_buckets; ++bkt) {
                long lo = count * bkt / used_buckets;
                long hi = count * (bkt + 1) / used_buckets;
                if (hi <= lo) continue;
                if (hi - lo < min_bucket_paths) est.low_sample_warning = true;
                double acc = 0.0;
                for (long i = lo; i < hi; ++i) acc += state_tail[static_cast<std::size_t>(i)].second;
                worst = std::max(worst, std::abs(acc / static_cast<double>(hi - lo)));
            }
            pc.per_tau.push_back(worst);
            est.value = std::max(est.value, worst);
        }
        est.per_control.push_back(std::move(pc));
    }
    return est;
}

Array doleans_exponential(Eigen::Ref<const Array> z, Eigen::Ref<const Array> b,
                          Eigen::Ref<const Array> qv) {
    if (z.size() != b.size() || z.size() != qv.size())
        throw ShapeError("doleans_exponential: series lengths differ");
    const long n = z.size();
    Array out(n);
    double expo = 0.0;
    out[0] = 1.0;
    for (long j = 0; j + 1 < n; ++j) {
        expo += z[j] * (b[j + 1] - b[j]) - 0.5 * z[j] * z[j] * (qv[j + 1] - qv[j]);
        out[j + 1] = std::exp(expo);
    }
    return out;
}

Array doleans_exponential(Eigen::Ref<const Array> z, const ScenarioPath& path) {
    return doleans_exponential(z, path.b, path.qv);
}

DoleansCheck doleans_martingale_check(const ZPaths& z) {
    DoleansCheck check;
    int members = 0;
    for (const auto& r : z.rows) members = std::max(members, r.member + 1);
    check.sup_plus = -std::numeric_limits<double>::infinity();
    check.sup_minus = -std::numeric_limits<double>::infinity();
    for (int m = 0; m < members; ++m) {
        std::vector<double> terminals;
        long excluded = 0;
        for (const auto& r : z.rows) {
            if (r.member != m) continue;
            Array e = doleans_exponential(r.z, r.b, r.qv);
            double v = e[e.size() - 1];
            if (std::isfinite(v))
                terminals.push_back(v);
            else
                ++excluded;
        }
        if (terminals.empty() && excluded == 0) continue;
        Array vals = Eigen::Map<Array>(terminals.data(), static_cast<long>(terminals.size()));
        MeanStdErr ms = mean_stderr(vals);
        DoleansCheck::PerControl pc;
        pc.label = m < static_cast<int>(z.control_labels.size()) ? z.control_labels[m]
                                                                 : std::to_string(m);
        pc.mean = ms.mean;
        pc.std_error = ms.std_error;
        pc.excluded = excluded;
        check.excluded_total += excluded;
        check.sup_plus = std::max(check.sup_plus, ms.mean - 1.0);
        check.sup_minus = std::max(check.sup_minus, 1.0 - ms.mean);
        check.per_control.push_back(std::move(pc));
    }
    return check;
}

ScenarioPath girsanov_shift(const ScenarioPath& path, Eigen::Ref<const Array> z) {
    ScenarioPath shifted = path;
    Array drift = qv_integral(z, path);
    shifted.b = path.b - drift;
    return shifted;  // qv and control are untouched: the shift has finite variation
}

GirsanovCheck girsanov_tilt_check(const ZPaths& z) {
    GirsanovCheck check;
    check.qv_invariant = true;
    int members = 0;
    for (const auto& r : z.rows) members = std::max(members, r.member + 1);
    for (int m = 0; m < members; ++m) {
        double num = 0.0, den = 0.0;
        for (const auto& r : z.rows) {
            if (r.member != m) continue;
            ScenarioPath p;
            p.dt = z.times[1] - z.times[0];
            p.t = z.times;
            p.b = r.b;
            p.qv = r.qv;
            ScenarioPath shifted = girsanov_shift(p, r.z);
            check.qv_invariant = check.qv_invariant && (shifted.qv == r.qv).all();
            Array e = doleans_exponential(r.z, r.b, r.qv);
            double w = e[e.size() - 1];
            if (!std::isfinite(w)) continue;
            num += w * shifted.b[shifted.b.size() - 1];
            den += w;
        }
        if (den == 0.0) continue;
        GirsanovCheck::PerControl pc;
        pc.label = m < static_cast<int>(z.control_labels.size()) ? z.control_labels[m]
                                                                 : std::to_string(m);
        pc.weighted_mean = num / den;
        check.max_abs_weighted_mean = std::max(check.max_abs_weighted_mean,
                                               std::abs(pc.weighted_mean));
        check.per_control.push_back(std::move(pc));
    }
    return check;
}

TiltReport decreasing_martingale_under_tilt(const SolutionTriplePaths& paths,
                                            const ScenarioFamily& family, bool tilt_with_z) {
    TiltReport report;
    report.sup_weighted = -std::numeric_limits<double>::infinity();
    report.max_kT = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < family.members.size(); ++m) {
        std::vector<double> weighted;
        for (const auto& p : paths.paths) {
            if (p.member != static_cast<int>(m)) continue;
            const long last = p.k.size() - 1;
            report.max_kT = std::max(report.max_kT, p.k[last]);
            double w = 1.0;
            if (tilt_with_z) {
                Array e = doleans_exponential(p.z, p.b, p.qv);
                w = e[e.size() - 1];
                if (!std::isfinite(w)) {
                    ++report.excluded;
                    continue;
                }
            }
            weighted.push_back(w * p.k[last]);
        }
        if (weighted.empty()) continue;
        Array vals = Eigen::Map<Array>(weighted.data(), static_cast<long>(weighted.size()));
        double mean = pairwise_sum(vals) / static_cast<double>(vals.size());
        report.per_control.push_back({family.members[m].control.label(), mean});
        report.sup_weighted = std::max(report.sup_weighted, mean);
    }
    return report;
}

namespace {

double tent_cutoff(double v, double eps) {  // 1 on [-eps,eps], 0 outside [-2eps,2eps]
    return std::clamp(2.0 - std::abs(v) / eps, 0.0, 1.0);
}

// increments of the partition knots plus the live increment, padded with zeros
Vector path_args(const Array& b, const Array& times, const TimePartition& partition, int n_inc,
                 long j) {
    const double dt = times[1] - times[0];
    const double t = times[j];
    const int k = j == 0 ? 1 : partition.interval_of(t);
    Vector args = Vector::Zero(n_inc);
    for (int i = 1; i < k; ++i) {
        long j0 = static_cast<long>(std::llround(partition.time(i - 1) / dt));
        long j1 = static_cast<long>(std::llround(partition.time(i) / dt));
        args[i - 1] = b[j1] - b[j0];
    }
    long j_left = static_cast<long>(std::llround(partition.time(k - 1) / dt));
    args[k - 1] = b[j] - b[j_left];
    return args;
}

using PathMap = std::map<std::pair<int, int>, const SolutionTriplePaths::PathTriple*>;

PathMap index_paths(const SolutionTriplePaths& run) {
    PathMap map;
    for (const auto& p : run.paths) map[{p.member, p.index}] = &p;
    return map;
}

}  // namespace

LinearizationReport linearization_coefficients(const SolutionTriplePaths& run1,
                                               const SolutionTriplePaths& run2,
                                               const GeneratorSpec& h1, const GeneratorSpec& h2,
                                               const TimePartition& partition, double eps) {
    if (run1.times.size() != run2.times.size())
        throw ConfigError("linearization_coefficients: runs use different time grids");
    LinearizationReport report;
    report.eps = eps;
    PathMap map2 = index_paths(run2);
    const long n = run1.times.size();
    const int n_inc = h1.num_increments;

    for (const auto& p1 : run1.paths) {
        auto it = map2.find({p1.member, p1.index});
        if (it == map2.end()) continue;
        const auto& p2 = *it->second;
        LinearizationReport::Series s;
        s.member = p1.member;
        s.index = p1.index;
        s.a.resize(n);
        s.b.resize(n);
        s.m.resize(n);
        s.h.resize(n);
        for (long j = 0; j < n; ++j) {
            const double t = run1.times[j];
            Vector args = path_args(p1.b, run1.times, partition, n_inc, j);
            const double y1 = p1.y[j], y2 = p2.y[j], z1 = p1.z[j], z2 = p2.z[j];
            const double yhat = y1 - y2, zhat = z1 - z2;
            const double ly = tent_cutoff(yhat, eps), lz = tent_cutoff(zhat, eps);
            const double dy = h1(t, args, y1, z1) - h1(t, args, y2, z1);
            const double dz = h1(t, args, y2, z1) - h1(t, args, y2, z2);
            s.a[j] = yhat != 0.0 ? (1.0 - ly) * dy / yhat : 0.0;
            s.b[j] = zhat != 0.0 ? (1.0 - lz) * dz / zhat : 0.0;
            s.m[j] = ly * dy + lz * dz;
            s.h[j] = h1(t, args, y2, z2) - h2(t, args, y2, z2);

            const double tol = 1e-9;
            double excess = std::abs(s.a[j]) - h1.lip_y;
            excess = std::max(excess, std::abs(s.b[j]) -
                                          h1.lip_z * (1.0 + std::abs(z1) + std::abs(z2)));
            excess = std::max(excess,
                              std::abs(s.m[j]) -
                                  2.0 * eps *
                                      (h1.lip_y + h1.lip_z * (1.0 + 2.0 * eps + 2.0 * std::abs(z1))));
            report.worst_excess = std::max(report.worst_excess, excess);
            if (excess > tol) report.bounds_hold = false;
        }
        report.per_path.push_back(std::move(s));
    }
    return report;
}

AprioriReport apriori_report(const SolutionTriplePaths& paths, const ScenarioFamily& family,
                             const std::vector<double>& k_powers,
                             const std::vector<double>& bmo_eval_times) {
    AprioriReport report;
    report.m_y = paths.m_y;
    report.m_z = paths.m_z;
    report.y_bound_warning = paths.y_bound_warning;
    for (const auto& p : paths.paths)
        report.sup_abs_y = std::max(report.sup_abs_y, p.y.abs().maxCoeff());

    report.bmo_value = bmo_norm(z_paths_from(paths, family), bmo_eval_times).value;

    for (double power : k_powers) {
        AprioriReport::KMoment mom;
        mom.p = power;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < family.members.size(); ++m) {
            std::vector<double> vals;
            for (const auto& p : paths.paths)
                if (p.member == static_cast<int>(m))
                    vals.push_back(std::pow(std::abs(p.k[p.k.size() - 1]), power));
            if (vals.empty()) continue;
            Array arr = Eigen::Map<Array>(vals.data(), static_cast<long>(vals.size()));
            MeanStdErr ms = mean_stderr(arr);
            if (ms.mean > best) {
                best = ms.mean;
                mom.value = ms.mean;
                mom.std_error = ms.std_error;
                mom.argmax_control = family.members[m].control.label();
            }
        }
        report.k_moments.push_back(std::move(mom));
    }
    return report;
}

StabilityReport stability_gap(const SolutionTriplePaths& run1, const SolutionTriplePaths& run2,
                              const GeneratorSpec& h1, const GeneratorSpec& h2,
                              const TimePartition& partition, double p_prime, double eps) {
    if (run1.times.size() != run2.times.size() ||
        std::abs(run1.times[run1.times.size() - 1] - run2.times[run2.times.size() - 1]) > 1e-12)
        throw ConfigError("stability_gap: runs use different discretizations");

    StabilityReport report;
    report.p_prime = p_prime;
    PathMap map2 = index_paths(run2);
    const long n = run1.times.size();
    const double dt = run1.times[1] - run1.times[0];
    const int n_inc = h1.num_increments;

    std::map<int, std::vector<double>> z_gaps_by_control;
    std::map<int, std::vector<double>> h_gaps_by_control;
    std::map<int, std::vector<double>> h_gaps_tilted_by_control;

    for (const auto& p1 : run1.paths) {
        auto it = map2.find({p1.member, p1.index});
        if (it == map2.end()) continue;
        const auto& p2 = *it->second;

        report.sup_y_gap = std::max(report.sup_y_gap, (p1.y - p2.y).abs().maxCoeff());
        report.terminal_gap =
            std::max(report.terminal_gap, std::abs(p1.y[n - 1] - p2.y[n - 1]));

        double z_int = 0.0, h_int = 0.0;
        Array bhat(n);
        for (long j = 0; j < n; ++j) {
            double zh = p1.z[j] - p2.z[j];
            if (j + 1 < n) z_int += zh * zh * dt;
            Vector args = path_args(p1.b, run1.times, partition, n_inc, j);
            double dz = h1(run1.times[j], args, p2.y[j], p1.z[j]) -
                        h1(run1.times[j], args, p2.y[j], p2.z[j]);
            bhat[j] = zh != 0.0 ? (1.0 - tent_cutoff(zh, eps)) * dz / zh : 0.0;
            if (j + 1 < n) {
                double hh = std::abs(h1(run1.times[j], args, p2.y[j], p2.z[j]) -
                                     h2(run1.times[j], args, p2.y[j], p2.z[j]));
                h_int += hh * (p1.qv[j + 1] - p1.qv[j]);
            }
        }
        z_gaps_by_control[p1.member].push_back(std::pow(z_int, p_prime / 2.0));
        h_gaps_by_control[p1.member].push_back(h_int);
        Array e = doleans_exponential(bhat, p1.b, p1.qv);
        double w = e[e.size() - 1];
        if (std::isfinite(w)) h_gaps_tilted_by_control[p1.member].push_back(w * h_int);
    }

    auto sup_of_means = [](std::map<int, std::vector<double>>& groups) {
        double best = 0.0;
        for (auto& [member, vals] : groups) {
            Array arr = Eigen::Map<Array>(vals.data(), static_cast<long>(vals.size()));
            best = std::max(best, pairwise_sum(arr) / static_cast<double>(arr.size()));
        }
        return best;
    };
    report.z_gap = sup_of_means(z_gaps_by_control);
    report.generator_gap = sup_of_means(h_gaps_by_control);
    report.generator_gap_tilted = sup_of_means(h_gaps_tilted_by_control);
    double driver = report.terminal_gap + report.generator_gap;
    report.implied_ratio = driver > 0.0 ? report.sup_y_gap / driver : 0.0;
    return report;
}

EmbeddingError embedding_error(int level, const ScenarioFamily& family, double alpha) {
    EmbeddingError err;
    err.level = level;
    err.alpha = alpha;
    const TimePartition partition = TimePartition::dyadic(level, family.horizon);
    for (double knot : partition.times()) {
        double steps = knot / family.dt;
        if (std::abs(steps - std::round(steps)) > 1e-9)
            throw ConfigError("embedding_error: scenario grid too coarse for level " +
                              std::to_string(level));
    }
    const int n = partition.intervals();

    // evaluation times: partition knots and interval midpoints
    std::vector<double> eval_times;
    for (int k = 1; k <= n; ++k) {
        eval_times.push_back(0.5 * (partition.time(k - 1) + partition.time(k)));
        eval_times.push_back(partition.time(k));
    }

    auto gap_functional = [&](const ScenarioPath& path) {
        double worst = 0.0;
        Vector x(n);
        for (double t : eval_times) {
            const int k = partition.interval_of(t);
            x.setZero();
            for (int i = 1; i < k; ++i) {
                long j0 = static_cast<long>(std::llround(partition.time(i - 1) / path.dt));
                long j1 = static_cast<long>(std::llround(partition.time(i) / path.dt));
                x[i - 1] = path.b[j1] - path.b[j0];
            }
            long j_left = static_cast<long>(std::llround(partition.time(k - 1) / path.dt));
            long j_t = static_cast<long>(std::llround(t / path.dt));
            x[k - 1] = path.b[j_t] - path.b[j_left];
            PiecewisePath emb = embed_path(x, partition, t);
            double gap = 0.0;
            for (long j = 0; j <= j_t; ++j)
                gap = std::max(gap, std::abs(emb(path.t[j]) - path.b[j]));
            worst = std::max(worst, gap);
        }
        return std::pow(worst, alpha);
    };
    auto osc_functional = [&](const ScenarioPath& path) {
        double worst = 0.0;
        for (int k = 1; k <= n; ++k) {
            long j0 = static_cast<long>(std::llround(partition.time(k - 1) / path.dt));
            long j1 = static_cast<long>(std::llround(partition.time(k) / path.dt));
            double osc = 0.0;
            for (long j = j0; j <= j1; ++j) osc = std::max(osc, std::abs(path.b[j] - path.b[j0]));
            worst = std::max(worst, osc);
        }
        return std::pow(2.0 * worst, alpha);
    };

    std::vector<UpperExpectation> ue =
        upper_expectations({gap_functional, osc_functional}, family);
    err.value = ue[0].estimate;
    err.osc_bound = ue[1].estimate;
    return err;
}

ApproxReport approximation_pipeline(const PathGeneratorSpec& h,
                                    const std::function<double(double)>& terminal_sum,
                                    double terminal_bound, double terminal_lip,
                                    const std::vector<int>& levels, const VolatilityBand& band,
                                    const PipelineConfig& config) {
    std::optional<ReducedGenerator> reduced = reduce_to_running_sum(h);
    if (!reduced)
        throw ConfigError(
            "approximation_pipeline: the driver must expose its current-value form");

    ApproxReport report;
    report.embed_alpha = config.embed_alpha;
    SolutionTriplePaths previous;
    bool have_previous = false;
    report.gaps_nonincreasing = true;
    report.embed_decay_ok = true;
    report.embed_decay_factor_min = std::numeric_limits<double>::infinity();

    for (std::size_t li = 0; li < levels.size(); ++li) {
        const int n = levels[li];
        TimePartition partition = TimePartition::dyadic(n, config.family.horizon);
        {
            double steps = partition.gap(1) / config.family.dt;
            if (std::abs(steps - std::round(steps)) > 1e-9 || steps < 1.0)
                throw ConfigError("approximation_pipeline: scenario grid too coarse for level " +
                                  std::to_string(n));
        }

        ReducedGenerator smoothed =
            mollify_reduced_ts(*reduced, Mollifier(n, 2, config.moll_nodes),
                               config.family.horizon);
        smoothed = mollify_reduced_yz(smoothed, Mollifier(n, 2, config.moll_nodes));

        ReducedCascade cascade = solve_cascade_reduced(smoothed, terminal_sum, terminal_bound,
                                                       terminal_lip, partition, band,
                                                       config.cascade);
        SolutionTriplePaths paths = build_solution_paths(cascade, config.family);

        ApproxLevel lvl;
        lvl.level = n;
        lvl.intervals = partition.intervals();
        lvl.y0 = cascade.y0();
        if (h.modulus)
            lvl.generator_gap_bound =
                (partition.intervals() + 1) * h.modulus(1.0 / n) +
                (1.0 / n) * (h.lip_y + 2.0 * h.lip_z * (cascade.m_z + 1.0));

        if (have_previous) {
            PathMap prev_map = index_paths(previous);
            double gap = 0.0;
            for (const auto& p : paths.paths) {
                auto it = prev_map.find({p.member, p.index});
                if (it == prev_map.end()) continue;
                gap = std::max(gap, (p.y - it->second->y).abs().maxCoeff());
            }
            lvl.sup_path_gap = gap;
            if (report.levels.size() >= 2) {
                double prev_gap = report.levels.back().sup_path_gap;
                if (gap > prev_gap + 1e-12) report.gaps_nonincreasing = false;
            }
        }

        EmbeddingError emb = embedding_error(n, config.family, config.embed_alpha);
        lvl.embed_err = emb.value;
        lvl.embed_err_mean = embedding_error(n, config.family, 1.0).value;
        if (!report.levels.empty()) {
            double factor = report.levels.back().embed_err / std::max(lvl.embed_err, 1e-300);
            report.embed_decay_factor_min = std::min(report.embed_decay_factor_min, factor);
            if (factor < std::sqrt(2.0)) report.embed_decay_ok = false;
        }

        report.levels.push_back(lvl);
        previous = std::move(paths);
        have_previous = true;
    }
    report.verdict = (report.gaps_nonincreasing && report.embed_decay_ok)
                         ? "converging"
                         : "not converging";
    return report;
}

}  // namespace gbsde
