#pragma once

#include "gbsde/cascade.hpp"
#include "gbsde/generator.hpp"
#include "gbsde/mollifier.hpp"
#include "gbsde/scenarios.hpp"
#include "gbsde/types.hpp"

namespace gbsde {

/// Adapted Z series paired with the paths that drive them.
struct ZPaths {
    Array times;
    struct Row {
        int member = -1;
        Array b, qv, z;
    };
    std::vector<Row> rows;
    std::vector<std::string> control_labels;
};

ZPaths z_paths_from(const SolutionTriplePaths& paths, const ScenarioFamily& family);
/// Simulated paths carrying a constant integrand (closed-form reference cases).
ZPaths z_paths_constant(const ScenarioFamily& family, double z);

/// Estimate of the squared BMO norm of Z. Stopping times are replaced by the
/// deterministic evaluation grid and conditioning by quantile buckets of B at
/// each time, so the value is a lower bound of the supremum.
struct BmoEstimate {
    double value = 0.0;
    std::vector<double> eval_times;
    int buckets = 0;
    bool low_sample_warning = false;
    struct PerControl {
        std::string label;
        std::vector<double> per_tau;  // max over buckets of |conditional mean|
    };
    std::vector<PerControl> per_control;
};

BmoEstimate bmo_norm(const ZPaths& z, const std::vector<double>& eval_times, int buckets = 8,
                     int min_bucket_paths = 32);

/// exp(int Z dB - 1/2 int Z^2 d<B>) along one path.
Array doleans_exponential(Eigen::Ref<const Array> z, const ScenarioPath& path);
Array doleans_exponential(Eigen::Ref<const Array> z, Eigen::Ref<const Array> b,
                          Eigen::Ref<const Array> qv);

/// Martingale checks of the stochastic exponential: per-control terminal means
/// (each should be 1) and the signed upper expectations of E_T - 1.
struct DoleansCheck {
    struct PerControl {
        std::string label;
        double mean = 0.0;
        double std_error = 0.0;
        long excluded = 0;  // overflowed paths, dropped and counted
    };
    std::vector<PerControl> per_control;
    double sup_plus = 0.0;   // max over controls of mean(E_T - 1)
    double sup_minus = 0.0;  // max over controls of mean(1 - E_T)
    long excluded_total = 0;
};

DoleansCheck doleans_martingale_check(const ZPaths& z);

/// B - int Z d<B>; the realized quadratic variation is carried over unchanged
/// (the shift has finite variation).
ScenarioPath girsanov_shift(const ScenarioPath& path, Eigen::Ref<const Array> z);

/// Self-normalized E(Z)-weighted mean of the shifted terminal value per
/// control (should vanish under the tilted measure).
struct GirsanovCheck {
    struct PerControl {
        std::string label;
        double weighted_mean = 0.0;
    };
    std::vector<PerControl> per_control;
    double max_abs_weighted_mean = 0.0;
    bool qv_invariant = false;  // exact equality of shifted and original qv
};

GirsanovCheck girsanov_tilt_check(const ZPaths& z);

/// sup over controls of E^P[E(Z)_T K_T] — the tilted expectation, left
/// unnormalized since E(Z) has mean one — plus the pathwise sign check.
struct TiltReport {
    struct PerControl {
        std::string label;
        double weighted_mean_kT = 0.0;
    };
    std::vector<PerControl> per_control;
    double sup_weighted = 0.0;
    double max_kT = 0.0;  // max over paths; nonpositive up to quadrature tolerance
    long excluded = 0;
};

TiltReport decreasing_martingale_under_tilt(const SolutionTriplePaths& paths,
                                            const ScenarioFamily& family, bool tilt_with_z = true);

/// Linearization coefficients between two runs sharing their scenarios, with
/// the tent cutoff l (1 on [-eps, eps], 0 outside [-2 eps, 2 eps]).
struct LinearizationReport {
    struct Series {
        int member = -1, index = -1;
        Array a, b, m, h;
    };
    std::vector<Series> per_path;
    bool bounds_hold = true;
    double worst_excess = 0.0;  // max over points of |coefficient| - bound
    double eps = 0.0;
};

LinearizationReport linearization_coefficients(const SolutionTriplePaths& run1,
                                               const SolutionTriplePaths& run2,
                                               const GeneratorSpec& h1, const GeneratorSpec& h2,
                                               const TimePartition& partition, double eps = 1e-3);

/// Reported a priori quantities: sup |Y|, the BMO estimate for Z and the upper
/// expectations of |K_T|^p.
struct AprioriReport {
    double sup_abs_y = 0.0;
    double bmo_value = 0.0;
    struct KMoment {
        double p = 1.0;
        double value = 0.0;
        double std_error = 0.0;
        std::string argmax_control;
    };
    std::vector<KMoment> k_moments;
    bool y_bound_warning = false;
    double m_y = 0.0, m_z = 0.0;
};

AprioriReport apriori_report(const SolutionTriplePaths& paths, const ScenarioFamily& family,
                             const std::vector<double>& k_powers,
                             const std::vector<double>& bmo_eval_times);

/// Estimable pieces of the stability estimates between two runs on identical
/// discretizations and scenarios.
struct StabilityReport {
    double sup_y_gap = 0.0;
    double z_gap = 0.0;  // max over controls of mean (int |Z1-Z2|^2 dt)^{p'/2}
    double p_prime = 2.0;
    double terminal_gap = 0.0;
    double generator_gap = 0.0;         // sup over controls, plain mean
    double generator_gap_tilted = 0.0;  // E(b-hat)-weighted mean
    double implied_ratio = 0.0;
};

StabilityReport stability_gap(const SolutionTriplePaths& run1, const SolutionTriplePaths& run2,
                              const GeneratorSpec& h1, const GeneratorSpec& h2,
                              const TimePartition& partition, double p_prime = 2.0,
                              double eps = 1e-3);

/// Monte-Carlo estimate of the alpha-moment of the largest sup-norm gap
/// between the embedded stopped paths of a dyadic level and the true stopped
/// paths, together with the per-interval oscillation majorant.
struct EmbeddingError {
    int level = 0;
    double alpha = 1.0;
    double value = 0.0;      // upper expectation of (max_t gap)^alpha
    double osc_bound = 0.0;  // upper expectation of (2 max interval oscillation)^alpha
};

EmbeddingError embedding_error(int level, const ScenarioFamily& family, double alpha = 1.0);

/// Full discretize-mollify-solve pipeline over nested dyadic levels, evaluated
/// on one common scenario family.
struct ApproxLevel {
    int level = 0;
    int intervals = 0;
    double y0 = 0.0;
    double sup_path_gap = 0.0;  // against the previous level (0 for the first)
    double embed_err = 0.0;      // alpha-moment estimate
    double embed_err_mean = 0.0; // alpha = 1 companion
    double generator_gap_bound = 0.0;  // (N+1) w(1/n) + mollification budget in (y,z)
};

struct ApproxReport {
    std::vector<ApproxLevel> levels;
    double embed_alpha = 3.0;
    bool gaps_nonincreasing = false;
    bool embed_decay_ok = false;      // factor >= sqrt(2) per level
    double embed_decay_factor_min = 0.0;
    std::string verdict;
};

struct PipelineConfig {
    CascadeConfig cascade;
    ScenarioFamily family;
    double embed_alpha = 3.0;
    int moll_nodes = 16;
};

ApproxReport approximation_pipeline(const PathGeneratorSpec& h,
                                    const std::function<double(double)>& terminal_sum,
                                    double terminal_bound, double terminal_lip,
                                    const std::vector<int>& levels, const VolatilityBand& band,
                                    const PipelineConfig& config);

}  // namespace gbsde
