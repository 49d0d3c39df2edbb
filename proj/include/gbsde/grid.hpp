#pragma once

#include "gbsde/types.hpp"

namespace gbsde {

/// Uniform spatial grid with m >= 3 nodes on [x_min, x_max].
struct SpaceGrid {
    double x_min = 0.0;
    double x_max = 0.0;
    int m = 0;

    SpaceGrid() = default;
    SpaceGrid(double lo, double hi, int nodes) : x_min(lo), x_max(hi), m(nodes) {
        if (nodes < 3) throw DomainError("SpaceGrid: need at least 3 nodes");
        if (!(lo < hi)) throw DomainError("SpaceGrid: x_min must be < x_max");
    }

    double dx() const { return (x_max - x_min) / (m - 1); }
    double node(int i) const { return x_min + dx() * i; }
    Array nodes() const { return Array::LinSpaced(m, x_min, x_max); }
    bool covers(double x) const { return x >= x_min && x <= x_max; }

    /// Left node index and linear weight for interpolating at x.
    /// Throws RangeError when x is outside the grid.
    std::pair<int, double> locate(double x) const {
        if (!covers(x))
            throw RangeError("SpaceGrid: x = " + std::to_string(x) + " outside [" +
                             std::to_string(x_min) + ", " + std::to_string(x_max) + "]");
        double r = (x - x_min) / dx();
        int i = static_cast<int>(r);
        if (i >= m - 1) i = m - 2;
        return {i, r - i};
    }
};

/// Values on a tensor product of per-axis uniform grids, stored flat in
/// row-major order (last axis fastest), interpolated multilinearly.
class TensorValues {
  public:
    TensorValues() = default;
    explicit TensorValues(std::vector<SpaceGrid> axes);

    int axes() const { return static_cast<int>(axes_.size()); }
    const SpaceGrid& axis(int a) const { return axes_.at(static_cast<std::size_t>(a)); }
    long size() const { return static_cast<long>(data_.size()); }
    long stride(int a) const { return strides_.at(static_cast<std::size_t>(a)); }

    Vector& data() { return data_; }
    const Vector& data() const { return data_; }

    /// Coordinates of the flat index `pos`.
    Vector point(long pos) const;

    double interpolate(Eigen::Ref<const Vector> point) const;

  private:
    std::vector<SpaceGrid> axes_;
    std::vector<long> strides_;
    Vector data_;
};

/// The 2^axes corner indices and weights of a multilinear stencil; shared by
/// TensorValues and the cascade's across-slice interpolation.
struct MultilinearStencil {
    std::vector<long> corners;     // flat offsets
    std::vector<double> weights;   // sum to 1
};
MultilinearStencil multilinear_stencil(const std::vector<SpaceGrid>& axes,
                                       const std::vector<long>& strides,
                                       Eigen::Ref<const Vector> point);

}  // namespace gbsde
