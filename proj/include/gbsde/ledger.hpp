#pragma once

#include "gbsde/types.hpp"

namespace gbsde {

/// Per-interval bounds on the spatial derivative of the cascade solution,
/// built backward from the terminal Lipschitz constant:
///   L^N = (L_phi + L_x/L_y) exp(sigma_hi^2 L_y (T - t_{N-1})) - L_x/L_y,
///   L^k = (L^{k+1} + L_x/L_y) exp(sigma_hi^2 L_y (t_k - t_{k-1})) - L_x/L_y.
/// For L_y = 0 the limit form L^k = L^{k+1} + sigma_hi^2 L_x dt applies.
struct DerivativeLedger {
    std::vector<double> bounds;  // bounds[k-1] = L^k, k = 1..N (decreasing index grows)

    double bound(int k) const { return bounds.at(static_cast<std::size_t>(k) - 1); }
    /// Global Z bound M_z = L^1.
    double m_z() const { return bounds.front(); }
    int intervals() const { return static_cast<int>(bounds.size()); }
};

DerivativeLedger derivative_bound_ledger(double phi_lip, double lip_x, double lip_y,
                                         const VolatilityBand& band,
                                         const TimePartition& partition);

}  // namespace gbsde
