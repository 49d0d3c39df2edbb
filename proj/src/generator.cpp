#include "gbsde/generator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace gbsde {

double PiecewisePath::operator()(double s) const {
    if (s <= knot_t.front()) return knot_v.front();
    if (s >= stop_time) return knot_v.back();
    auto it = std::upper_bound(knot_t.begin(), knot_t.end(), s);
    std::size_t i = static_cast<std::size_t>(it - knot_t.begin());
    double t0 = knot_t[i - 1], t1 = knot_t[i];
    double v0 = knot_v[i - 1], v1 = knot_v[i];
    double w = (s - t0) / (t1 - t0);
    return v0 + w * (v1 - v0);
}

double PiecewisePath::sup_distance(const PiecewisePath& a, const PiecewisePath& b) {
    std::vector<double> ts;
    ts.reserve(a.knot_t.size() + b.knot_t.size() + 3);
    ts.insert(ts.end(), a.knot_t.begin(), a.knot_t.end());
    ts.insert(ts.end(), b.knot_t.begin(), b.knot_t.end());
    ts.push_back(a.stop_time);
    ts.push_back(b.stop_time);
    ts.push_back(std::max(a.horizon, b.horizon));
    std::sort(ts.begin(), ts.end());
    double m = 0.0;
    for (double s : ts) m = std::max(m, std::abs(a(s) - b(s)));
    return m;
}

PiecewisePath embed_path(Eigen::Ref<const Vector> x, const TimePartition& partition, double t) {
    const double horizon = partition.horizon();
    if (t < 0.0 || t > horizon)
        throw DomainError("embed_path: t = " + std::to_string(t) + " outside [0, " +
                          std::to_string(horizon) + "]");
    const int n = partition.intervals();
    if (x.size() != n)
        throw ShapeError("embed_path: expected " + std::to_string(n) + " increments, got " +
                         std::to_string(x.size()));
    const int k = partition.interval_of(t);

    PiecewisePath path;
    path.horizon = horizon;
    path.stop_time = t;
    path.knot_t.push_back(0.0);
    path.knot_v.push_back(0.0);
    double sum = 0.0;
    for (int i = 1; i < k; ++i) {
        sum += x[i - 1];
        path.knot_t.push_back(partition.time(i));
        path.knot_v.push_back(sum);
    }
    // live segment: rises to sum_{j<=k} x_j at time t, constant afterwards
    sum += x[k - 1];
    if (t > path.knot_t.back()) {
        path.knot_t.push_back(t);
        path.knot_v.push_back(sum);
    } else {
        path.knot_v.back() = sum;  // t coincides with t_{k-1} (only t = 0)
    }
    return path;
}

GeneratorSpec discretize_path_generator(const PathGeneratorSpec& h,
                                        const TimePartition& partition) {
    GeneratorSpec f;
    f.num_increments = partition.intervals();
    f.m0 = h.m0;
    f.lip_y = h.lip_y;
    f.lip_z = h.lip_z;
    // |f(t,x1) - f(t,x2)| <= w^h(sum |x1_k - x2_k|), so the per-coordinate
    // Lipschitz constant is the modulus slope at 0+ when the modulus is linear;
    // callers needing a ledger bound declare lip_x on the result themselves.
    f.modulus = h.modulus;
    f.deps = h.deps;
    f.eval = [h, partition](double t, Eigen::Ref<const Vector> x, double y, double z) {
        return h.eval(t, embed_path(x, partition, t), y, z);
    };
    return f;
}

std::optional<ReducedGenerator> reduce_to_running_sum(const PathGeneratorSpec& h) {
    if (!h.current_value) return std::nullopt;
    ReducedGenerator r;
    r.eval = *h.current_value;
    r.m0 = h.m0;
    r.lip_y = h.lip_y;
    r.lip_z = h.lip_z;
    r.modulus = h.modulus;
    r.deps = h.deps;
    if (h.modulus) {
        // |H(t,s1) - H(t,s2)| <= w^h(|s1 - s2|); a linear modulus gives lip_s.
        double w1 = h.modulus(1e-6);
        r.lip_s = w1 / 1e-6;
    }
    return r;
}

namespace {

struct SampleRng {
    std::mt19937_64 eng;
    explicit SampleRng(uint64_t seed) : eng(seed) {}
    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(eng);
    }
};

}  // namespace

std::string sample_check_generator(const GeneratorSpec& f, double horizon, double x_radius,
                                   double y_radius, double z_radius, int samples, uint64_t seed) {
    SampleRng rng(seed);
    Vector x(f.num_increments), x1(f.num_increments), x2(f.num_increments);
    std::ostringstream msg;
    for (int s = 0; s < samples; ++s) {
        double t = rng.uniform(0.0, horizon);
        for (int i = 0; i < f.num_increments; ++i) x[i] = rng.uniform(-x_radius, x_radius);
        double v0 = f(t, x, 0.0, 0.0);
        if (std::abs(v0) > f.m0 + 1e-12) {
            msg << "generator bound |f(t,x,0,0)| = " << std::abs(v0) << " exceeds m0 = " << f.m0;
            return msg.str();
        }
        double y1 = rng.uniform(-y_radius, y_radius), y2 = rng.uniform(-y_radius, y_radius);
        double z1 = rng.uniform(-z_radius, z_radius), z2 = rng.uniform(-z_radius, z_radius);
        double gap = std::abs(f(t, x, y1, z1) - f(t, x, y2, z2));
        double allowed = f.lip_y * std::abs(y1 - y2) +
                         f.lip_z * (1.0 + std::abs(z1) + std::abs(z2)) * std::abs(z1 - z2);
        if (gap > allowed + 1e-10) {
            msg << "generator (y,z) Lipschitz violated: gap " << gap << " > " << allowed;
            return msg.str();
        }
        if (f.modulus) {
            for (int i = 0; i < f.num_increments; ++i) {
                x1[i] = rng.uniform(-x_radius, x_radius);
                x2[i] = rng.uniform(-x_radius, x_radius);
            }
            double l1 = (x1 - x2).cwiseAbs().sum();
            double xgap = std::abs(f(t, x1, y1, z1) - f(t, x2, y1, z1));
            if (xgap > f.modulus(l1) + 1e-10) {
                msg << "generator x-modulus violated: gap " << xgap << " > w(" << l1
                    << ") = " << f.modulus(l1);
                return msg.str();
            }
        }
    }
    return {};
}

std::string sample_check_terminal(const TerminalSpec& phi, double x_radius, int samples,
                                  uint64_t seed) {
    SampleRng rng(seed);
    Vector x1(phi.num_increments), x2(phi.num_increments);
    std::ostringstream msg;
    for (int s = 0; s < samples; ++s) {
        for (int i = 0; i < phi.num_increments; ++i) {
            x1[i] = rng.uniform(-x_radius, x_radius);
            x2[i] = rng.uniform(-x_radius, x_radius);
        }
        if (std::abs(phi(x1)) > phi.bound + 1e-12) {
            msg << "terminal bound |phi| = " << std::abs(phi(x1)) << " exceeds " << phi.bound;
            return msg.str();
        }
        double gap = std::abs(phi(x1) - phi(x2));
        double allowed = phi.lipschitz * (x1 - x2).cwiseAbs().sum();
        if (gap > allowed + 1e-10) {
            msg << "terminal Lipschitz violated: gap " << gap << " > " << allowed;
            return msg.str();
        }
    }
    return {};
}

}  // namespace gbsde
