#include "gbsde/types.hpp"

#include <algorithm>
#include <cmath>

namespace gbsde {

TimePartition::TimePartition(std::vector<double> times) : times_(std::move(times)) {
    if (times_.size() < 2) throw DomainError("TimePartition: need at least two knots");
    if (times_.front() != 0.0) throw DomainError("TimePartition: first knot must be 0");
    for (std::size_t i = 1; i < times_.size(); ++i)
        if (!(times_[i] > times_[i - 1]))
            throw DomainError("TimePartition: knots must be strictly increasing at index " +
                              std::to_string(i));
}

TimePartition TimePartition::uniform(int intervals, double horizon) {
    if (intervals < 1) throw DomainError("TimePartition::uniform: intervals must be >= 1");
    if (!(horizon > 0.0)) throw DomainError("TimePartition::uniform: horizon must be > 0");
    std::vector<double> t(static_cast<std::size_t>(intervals) + 1);
    for (int k = 0; k <= intervals; ++k) t[k] = horizon * k / intervals;
    t.back() = horizon;
    return TimePartition(std::move(t));
}

TimePartition TimePartition::dyadic(int level, double horizon) {
    if (level < 0) throw DomainError("TimePartition::dyadic: level must be >= 0");
    return uniform(1 << level, horizon);
}

double TimePartition::mesh() const {
    double m = 0.0;
    for (std::size_t i = 1; i < times_.size(); ++i) m = std::max(m, times_[i] - times_[i - 1]);
    return m;
}

int TimePartition::interval_of(double t) const {
    if (t < 0.0 || t > horizon())
        throw DomainError("TimePartition::interval_of: t = " + std::to_string(t) +
                          " outside [0, " + std::to_string(horizon()) + "]");
    if (t == 0.0) return 1;
    auto it = std::lower_bound(times_.begin(), times_.end(), t);
    return static_cast<int>(it - times_.begin());
}

TimePartition TimePartition::refined(int factor) const {
    if (factor < 1) throw DomainError("TimePartition::refined: factor must be >= 1");
    std::vector<double> t;
    t.reserve((times_.size() - 1) * factor + 1);
    for (std::size_t i = 1; i < times_.size(); ++i) {
        for (int j = 0; j < factor; ++j)
            t.push_back(times_[i - 1] + (times_[i] - times_[i - 1]) * j / factor);
    }
    t.push_back(times_.back());
    return TimePartition(std::move(t));
}

bool TimePartition::contains(const TimePartition& coarser) const {
    for (double s : coarser.times()) {
        auto it = std::lower_bound(times_.begin(), times_.end(), s);
        if (it == times_.end() || std::abs(*it - s) > 1e-12 * std::max(1.0, horizon()))
            return false;
    }
    return true;
}

}  // namespace gbsde
