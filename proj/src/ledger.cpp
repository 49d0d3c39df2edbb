#include "gbsde/ledger.hpp"

#include <cmath>

namespace gbsde {

DerivativeLedger derivative_bound_ledger(double phi_lip, double lip_x, double lip_y,
                                         const VolatilityBand& band,
                                         const TimePartition& partition) {
    if (phi_lip < 0.0 || lip_x < 0.0 || lip_y < 0.0)
        throw DomainError("derivative_bound_ledger: constants must be nonnegative");
    const int n = partition.intervals();
    const double s2 = band.hi2();
    // treat tiny lip_y as the exact degenerate limit to avoid catastrophic
    // cancellation in (L + r) e^eps - r with r = lip_x / lip_y
    const bool degenerate = lip_y < 1e-300;

    DerivativeLedger ledger;
    ledger.bounds.resize(static_cast<std::size_t>(n));
    double next = phi_lip;
    for (int k = n; k >= 1; --k) {
        double dt = partition.gap(k);
        double cur;
        if (degenerate) {
            cur = next + s2 * lip_x * dt;
        } else {
            double r = lip_x / lip_y;
            cur = (next + r) * std::exp(s2 * lip_y * dt) - r;
        }
        ledger.bounds[static_cast<std::size_t>(k) - 1] = cur;
        next = cur;
    }
    return ledger;
}

}  // namespace gbsde
