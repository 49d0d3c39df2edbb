#pragma once

#include "gbsde/types.hpp"

#include <functional>
#include <string>

namespace gbsde {

/// One admissible volatility control: the per-step value stays inside the band.
struct VolatilityControl {
    enum class Kind { Constant, BangBang, PiecewiseRandom };
    Kind kind = Kind::Constant;
    double sigma_a = 0.0;     // constant value, or bang-bang value before the switch
    double sigma_b = 0.0;     // bang-bang value after the switch
    double switch_time = 0.0; // bang-bang only

    static VolatilityControl constant(double sigma);
    static VolatilityControl bang_bang(double before, double after, double switch_time);
    static VolatilityControl piecewise_random();

    std::string label() const;
};

/// One simulated path: B, its realized quadratic variation (sum of
/// sigma^2 dt), and the control values, all on a uniform grid of step dt.
struct ScenarioPath {
    double dt = 0.0;
    Array t;      // size steps + 1
    Array b;      // B, b[0] = 0
    Array qv;     // realized <B>, qv[0] = 0, nondecreasing
    Array sigma;  // per-step control value, size steps
    int control_index = -1;
    uint64_t seed = 0;

    long steps() const { return sigma.size(); }
    double horizon() const { return t[t.size() - 1]; }
};

/// A finite family of controls standing in for the scenario-measure class:
/// the resulting supremum is a certified lower bound of the sublinear
/// expectation. The two constant extreme controls should always be present.
struct ScenarioFamily {
    VolatilityBand band;
    double dt = 0.0;
    double horizon = 0.0;
    uint64_t base_seed = 0;

    struct Member {
        VolatilityControl control;
        int path_count = 0;
    };
    std::vector<Member> members;

    /// Constant extremes, eight bang-bang controls at dyadic switch times and
    /// eight independent piecewise-random controls.
    static ScenarioFamily default_family(const VolatilityBand& band, double dt, double horizon,
                                         int paths_per_control, uint64_t base_seed);
    /// Just the two constant extreme controls.
    static ScenarioFamily extremes(const VolatilityBand& band, double dt, double horizon,
                                   int paths_per_control, uint64_t base_seed);

    /// Throws ConfigError unless both constant extremes are present.
    void validate() const;

    uint64_t path_seed(int member, int path) const;
    long steps() const;
};

/// Simulate one path: increments sigma_j sqrt(dt) xi_j with seeded standard
/// normal deviates, qv increments sigma_j^2 dt. Throws DomainError if the
/// control leaves the band or dt does not divide the horizon.
ScenarioPath simulate_scenario(const VolatilityControl& control, const VolatilityBand& band,
                               uint64_t seed, double dt, double horizon, int control_index = -1);

/// Keep every `factor`-th grid point. The coarse control value is the
/// root-mean-square of the fine values, so realized qv is preserved exactly.
ScenarioPath restrict_path(const ScenarioPath& path, int factor);

/// Cumulative non-anticipating integral sum_j eta_j (B_{j+1} - B_j); eta must
/// live on the path grid (size steps + 1; the last entry is unused).
Array ito_integral(Eigen::Ref<const Array> eta, const ScenarioPath& path);
/// Same with quadratic-variation increments.
Array qv_integral(Eigen::Ref<const Array> eta, const ScenarioPath& path);

using PathFunctional = std::function<double(const ScenarioPath&)>;

struct ControlStat {
    std::string label;
    double mean = 0.0;
    double std_error = 0.0;
    long count = 0;
};

struct UpperExpectation {
    double estimate = 0.0;       // max over controls of the Monte-Carlo means
    int argmax_control = -1;
    double max_std_error = 0.0;  // standard error at the argmax control
    std::vector<ControlStat> per_control;
};

/// Streamed estimate of the upper expectation: paths are simulated on the fly
/// (memory stays flat in the path count) and reductions are pairwise in a
/// fixed order. The estimate is a lower bound of the supremum over all
/// admissible scenario measures.
UpperExpectation upper_expectation(const PathFunctional& functional, const ScenarioFamily& family);

/// Several functionals evaluated in one sweep over the same simulated paths.
std::vector<UpperExpectation> upper_expectations(const std::vector<PathFunctional>& functionals,
                                                 const ScenarioFamily& family);

/// Sequential visitor over all paths of the family (tests, exports).
void for_each_path(const ScenarioFamily& family,
                   const std::function<void(const ScenarioPath&, int member, int index)>& visit);

/// Materialize every path of the family, in family order (parallel, with
/// deterministic slot placement).
std::vector<ScenarioPath> simulate_family(const ScenarioFamily& family);

}  // namespace gbsde
