#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <vector>

namespace gbsde {

using Scalar = double;
using Array = Eigen::ArrayXd;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Error taxonomy used across the library. All carry a human-readable message
// naming the offending quantity.
struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Ellipticity interval [sigma_lo, sigma_hi] for the volatility. Only the
/// non-degenerate case sigma_lo > 0 is allowed.
struct VolatilityBand {
    double sigma_lo = 1.0;
    double sigma_hi = 1.0;

    VolatilityBand() = default;  // classical unit band
    VolatilityBand(double lo, double hi) : sigma_lo(lo), sigma_hi(hi) {
        if (!(lo > 0.0) || !(lo <= hi))
            throw DomainError("VolatilityBand: need 0 < sigma_lo <= sigma_hi, got [" +
                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }

    bool contains(double s) const { return s >= sigma_lo && s <= sigma_hi; }
    bool is_classical() const { return sigma_lo == sigma_hi; }
    double lo2() const { return sigma_lo * sigma_lo; }
    double hi2() const { return sigma_hi * sigma_hi; }
};

/// Strictly increasing time knots 0 = t_0 < t_1 < ... < t_N = T.
class TimePartition {
  public:
    explicit TimePartition(std::vector<double> times);

    static TimePartition uniform(int intervals, double horizon);
    /// 2^level uniform intervals; nested across levels.
    static TimePartition dyadic(int level, double horizon);

    int intervals() const { return static_cast<int>(times_.size()) - 1; }
    double horizon() const { return times_.back(); }
    double time(int k) const { return times_.at(static_cast<std::size_t>(k)); }
    double gap(int k) const { return times_.at(k) - times_.at(k - 1); }
    double mesh() const;

    /// Interval index k in 1..N with t in (t_{k-1}, t_k]; t = 0 maps to 1.
    int interval_of(double t) const;

    const std::vector<double>& times() const { return times_; }

    /// Subdivide every gap into `factor` equal pieces.
    TimePartition refined(int factor) const;

    bool contains(const TimePartition& coarser) const;

  private:
    std::vector<double> times_;
};

}  // namespace gbsde
