#include "gbsde/mollifier.hpp"

#include <cmath>
#include <numbers>

namespace gbsde {

void gauss_legendre(int order, Array& nodes, Array& weights) {
    if (order < 1) throw ConfigError("gauss_legendre: order must be >= 1");
    nodes.resize(order);
    weights.resize(order);
    const int m = (order + 1) / 2;
    for (int i = 0; i < m; ++i) {
        // Chebyshev initial guess, Newton on the three-term recurrence.
        double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= order; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = order * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
}

namespace {

double bump(double u) {  // support (-1, 1)
    double q = u * u;
    return q < 1.0 ? std::exp(1.0 / (q - 1.0)) : 0.0;
}

}  // namespace

Mollifier::Mollifier(int n, int dim, int nodes_per_axis) : n_(n), dim_(dim) {
    if (n < 1) throw ConfigError("Mollifier: order n must be >= 1");
    if (dim < 1) throw ConfigError("Mollifier: dim must be >= 1");
    if (nodes_per_axis < 2) throw ConfigError("Mollifier: need at least 2 nodes per axis");
    Array gl_nodes, gl_weights;
    gauss_legendre(nodes_per_axis, gl_nodes, gl_weights);
    const double r = radius();
    axis_nodes_ = r * gl_nodes;
    axis_weights_.resize(nodes_per_axis);
    for (int i = 0; i < nodes_per_axis; ++i) axis_weights_[i] = gl_weights[i] * bump(gl_nodes[i]);
    const double total = axis_weights_.sum();
    if (!(total > 0.0)) throw ConfigError("Mollifier: quadrature weights vanished");
    axis_norm_ = total * r;  // integral of the unnormalized 1-d kernel
    axis_weights_ /= total;  // discrete weights sum to 1 exactly
}

double Mollifier::density(Eigen::Ref<const Vector> u) const {
    if (u.size() != dim_) throw ShapeError("Mollifier::density: dimension mismatch");
    const double r = radius();
    double val = 1.0;
    for (int i = 0; i < dim_; ++i) val *= bump(u[i] / r) / (axis_norm_ / r) / r;
    return val;
}

namespace {

// Tensor convolution over the active axes: axes the integrand ignores
// contribute a factor sum(w) = 1 and are skipped.
template <typename Fn>
double tensor_convolve(const Array& nodes, const Array& weights, int axes, Fn&& value,
                       std::vector<double>& shift) {
    if (axes == 0) return value(shift);
    const int q = static_cast<int>(nodes.size());
    std::vector<int> idx(axes, 0);
    double acc = 0.0;
    while (true) {
        double w = 1.0;
        for (int a = 0; a < axes; ++a) {
            shift[a] = nodes[idx[a]];
            w *= weights[idx[a]];
        }
        acc += w * value(shift);
        int a = 0;
        while (a < axes && ++idx[a] == q) {
            idx[a] = 0;
            ++a;
        }
        if (a == axes) break;
    }
    return acc;
}

}  // namespace

GeneratorSpec mollify_generator_yz(const GeneratorSpec& f, const Mollifier& rho) {
    if (rho.dim() != 2) throw ConfigError("mollify_generator_yz: kernel dimension must be 2");
    GeneratorSpec g = f;
    if (!f.deps.y && !f.deps.z) return g;  // identity: kernel integrates to one
    const Array nodes = rho.axis_nodes();
    const Array weights = rho.axis_weights();
    const bool use_y = f.deps.y, use_z = f.deps.z;
    auto base = f.eval;
    g.eval = [=](double t, Eigen::Ref<const Vector> x, double y, double z) {
        const int q = static_cast<int>(nodes.size());
        double acc = 0.0;
        if (use_y && use_z) {
            for (int i = 0; i < q; ++i)
                for (int j = 0; j < q; ++j)
                    acc += weights[i] * weights[j] * base(t, x, y - nodes[i], z - nodes[j]);
        } else if (use_y) {
            for (int i = 0; i < q; ++i) acc += weights[i] * base(t, x, y - nodes[i], z);
        } else {
            for (int j = 0; j < q; ++j) acc += weights[j] * base(t, x, y, z - nodes[j]);
        }
        return acc;
    };
    return g;
}

GeneratorSpec mollify_generator_tx(const GeneratorSpec& f, const Mollifier& rho, double horizon,
                                   int max_tensor_axes) {
    if (rho.dim() != f.num_increments + 1)
        throw ConfigError("mollify_generator_tx: kernel dimension " + std::to_string(rho.dim()) +
                          " does not match N+1 = " + std::to_string(f.num_increments + 1));
    GeneratorSpec g = f;
    const int x_axes = f.deps.x ? f.num_increments : 0;
    const int active = (f.deps.t ? 1 : 0) + x_axes;
    if (active == 0) return g;
    if (active > max_tensor_axes)
        throw ConfigError("mollify_generator_tx: " + std::to_string(active) +
                          " active axes exceed the tensor budget of " +
                          std::to_string(max_tensor_axes) + "; use the running-sum form");
    const Array nodes = rho.axis_nodes();
    const Array weights = rho.axis_weights();
    const bool use_t = f.deps.t;
    auto base = f.eval;
    const int n_inc = f.num_increments;
    g.eval = [=](double t, Eigen::Ref<const Vector> x, double y, double z) {
        std::vector<double> shift(static_cast<std::size_t>(active), 0.0);
        Vector xs(n_inc);
        auto value = [&](const std::vector<double>& sh) {
            int a = 0;
            double ts = t;
            if (use_t) ts = std::clamp(t - sh[a++], 0.0, horizon);
            if (x_axes > 0)
                for (int i = 0; i < n_inc; ++i) xs[i] = x[i] - sh[a++];
            else
                xs = x;
            return base(ts, xs, y, z);
        };
        return tensor_convolve(nodes, weights, active, value, shift);
    };
    return g;
}

ReducedGenerator mollify_reduced_ts(const ReducedGenerator& f, const Mollifier& rho,
                                    double horizon) {
    if (rho.dim() != 2) throw ConfigError("mollify_reduced_ts: kernel dimension must be 2");
    ReducedGenerator g = f;
    if (!f.deps.t && !f.deps.x) return g;
    const Array nodes = rho.axis_nodes();
    const Array weights = rho.axis_weights();
    const bool use_t = f.deps.t, use_s = f.deps.x;
    auto base = f.eval;
    g.eval = [=](double t, double s, double y, double z) {
        const int q = static_cast<int>(nodes.size());
        double acc = 0.0;
        if (use_t && use_s) {
            for (int i = 0; i < q; ++i) {
                double ts = std::clamp(t - nodes[i], 0.0, horizon);
                for (int j = 0; j < q; ++j)
                    acc += weights[i] * weights[j] * base(ts, s - nodes[j], y, z);
            }
        } else if (use_t) {
            for (int i = 0; i < q; ++i)
                acc += weights[i] * base(std::clamp(t - nodes[i], 0.0, horizon), s, y, z);
        } else {
            for (int j = 0; j < q; ++j) acc += weights[j] * base(t, s - nodes[j], y, z);
        }
        return acc;
    };
    return g;
}

ReducedGenerator mollify_reduced_yz(const ReducedGenerator& f, const Mollifier& rho) {
    if (rho.dim() != 2) throw ConfigError("mollify_reduced_yz: kernel dimension must be 2");
    ReducedGenerator g = f;
    if (!f.deps.y && !f.deps.z) return g;
    const Array nodes = rho.axis_nodes();
    const Array weights = rho.axis_weights();
    const bool use_y = f.deps.y, use_z = f.deps.z;
    auto base = f.eval;
    g.eval = [=](double t, double s, double y, double z) {
        const int q = static_cast<int>(nodes.size());
        double acc = 0.0;
        if (use_y && use_z) {
            for (int i = 0; i < q; ++i)
                for (int j = 0; j < q; ++j)
                    acc += weights[i] * weights[j] * base(t, s, y - nodes[i], z - nodes[j]);
        } else if (use_y) {
            for (int i = 0; i < q; ++i) acc += weights[i] * base(t, s, y - nodes[i], z);
        } else {
            for (int j = 0; j < q; ++j) acc += weights[j] * base(t, s, y, z - nodes[j]);
        }
        return acc;
    };
    return g;
}

}  // namespace gbsde
