#pragma once

#include "gbsde/generator.hpp"
#include "gbsde/types.hpp"

namespace gbsde {

/// Normalized smooth kernel of support radius 1/n, realized as a product of
/// one-dimensional bumps exp(1/(u^2 - 1)) so that convolution factorizes per
/// axis. Quadrature is Gauss-Legendre per axis, with the discrete weights
/// renormalized to sum to one exactly.
class Mollifier {
  public:
    /// dim = 2 for (y, z) smoothing, N+1 for (t, x) smoothing.
    Mollifier(int n, int dim, int nodes_per_axis = 16);

    int order() const { return n_; }
    int dim() const { return dim_; }
    double radius() const { return 1.0 / n_; }
    int nodes_per_axis() const { return static_cast<int>(axis_nodes_.size()); }

    const Array& axis_nodes() const { return axis_nodes_; }      // in (-1/n, 1/n)
    const Array& axis_weights() const { return axis_weights_; }  // sum to 1

    /// Product kernel density at a point of matching dimension (for tests).
    double density(Eigen::Ref<const Vector> u) const;

  private:
    int n_;
    int dim_;
    Array axis_nodes_;
    Array axis_weights_;
    double axis_norm_;  // 1-d normalization constant of the bump
};

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int order, Array& nodes, Array& weights);

/// Smooth f in (y, z): f^n(t,x,y,z) = sum_w rho(w) f(t, x, y - w_y, z - w_z).
/// Exact on drivers affine in (y, z); axes the driver is constant in are
/// skipped (the kernel integrates out exactly).
GeneratorSpec mollify_generator_yz(const GeneratorSpec& f, const Mollifier& rho);

/// Smooth f in (t, x_1..x_N) with the time argument extended constantly
/// outside [0, horizon]. Requires rho.dim() == N + 1. The tensor loop runs
/// only over axes the driver depends on; more than `max_tensor_axes` active
/// axes is a configuration error (use the running-sum form instead).
GeneratorSpec mollify_generator_tx(const GeneratorSpec& f, const Mollifier& rho, double horizon,
                                   int max_tensor_axes = 4);

/// Running-sum analogues operating on (t, s) with a dim-2 kernel.
ReducedGenerator mollify_reduced_ts(const ReducedGenerator& f, const Mollifier& rho,
                                    double horizon);
ReducedGenerator mollify_reduced_yz(const ReducedGenerator& f, const Mollifier& rho);

}  // namespace gbsde
