#pragma once

#include "gbsde/types.hpp"

#include <algorithm>

namespace gbsde {

/// G(a) = (sigma_hi^2 a^+ - sigma_lo^2 a^-) / 2. Total, monotone nondecreasing,
/// subadditive and positively homogeneous in a.
inline double g_function(double a, const VolatilityBand& band) {
    return 0.5 * (band.hi2() * std::max(a, 0.0) - band.lo2() * std::max(-a, 0.0));
}

/// Elementwise G on an Eigen array expression.
template <typename Derived>
auto g_function(const Eigen::ArrayBase<Derived>& a, const VolatilityBand& band) {
    // -lo2 * max(-a, 0) == lo2 * min(a, 0)
    return 0.5 * (band.hi2() * a.max(0.0) + band.lo2() * a.min(0.0));
}

}  // namespace gbsde
