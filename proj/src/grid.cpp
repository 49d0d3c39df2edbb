#include "gbsde/grid.hpp"

#include <cmath>

namespace gbsde {

TensorValues::TensorValues(std::vector<SpaceGrid> axes) : axes_(std::move(axes)) {
    strides_.resize(axes_.size());
    long total = 1;
    for (int a = static_cast<int>(axes_.size()) - 1; a >= 0; --a) {
        strides_[static_cast<std::size_t>(a)] = total;
        total *= axes_[static_cast<std::size_t>(a)].m;
    }
    data_ = Vector::Zero(total);
}

Vector TensorValues::point(long pos) const {
    Vector p(axes());
    for (int a = 0; a < axes(); ++a) {
        long i = pos / strides_[static_cast<std::size_t>(a)];
        pos -= i * strides_[static_cast<std::size_t>(a)];
        p[a] = axes_[static_cast<std::size_t>(a)].node(static_cast<int>(i));
    }
    return p;
}

MultilinearStencil multilinear_stencil(const std::vector<SpaceGrid>& axes,
                                       const std::vector<long>& strides,
                                       Eigen::Ref<const Vector> point) {
    const int n = static_cast<int>(axes.size());
    if (point.size() != n) throw ShapeError("multilinear_stencil: dimension mismatch");
    MultilinearStencil st;
    if (n == 0) {
        st.corners = {0};
        st.weights = {1.0};
        return st;
    }
    std::vector<int> base(static_cast<std::size_t>(n));
    std::vector<double> frac(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        auto [i, w] = axes[static_cast<std::size_t>(a)].locate(point[a]);
        base[static_cast<std::size_t>(a)] = i;
        frac[static_cast<std::size_t>(a)] = w;
    }
    const long corners = 1L << n;
    st.corners.resize(static_cast<std::size_t>(corners));
    st.weights.resize(static_cast<std::size_t>(corners));
    for (long c = 0; c < corners; ++c) {
        double weight = 1.0;
        long pos = 0;
        for (int a = 0; a < n; ++a) {
            bool hi = (c >> a) & 1;
            weight *= hi ? frac[static_cast<std::size_t>(a)]
                         : 1.0 - frac[static_cast<std::size_t>(a)];
            pos += strides[static_cast<std::size_t>(a)] *
                   (base[static_cast<std::size_t>(a)] + (hi ? 1 : 0));
        }
        st.corners[static_cast<std::size_t>(c)] = pos;
        st.weights[static_cast<std::size_t>(c)] = weight;
    }
    return st;
}

double TensorValues::interpolate(Eigen::Ref<const Vector> point) const {
    if (axes() == 0) return data_[0];
    MultilinearStencil st = multilinear_stencil(axes_, strides_, point);
    double acc = 0.0;
    for (std::size_t c = 0; c < st.corners.size(); ++c)
        acc += st.weights[c] * data_[st.corners[c]];
    return acc;
}

}  // namespace gbsde
