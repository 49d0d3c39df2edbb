#pragma once

#include "gbsde/generator.hpp"
#include "gbsde/grid.hpp"
#include "gbsde/ledger.hpp"
#include "gbsde/pde.hpp"
#include "gbsde/scenarios.hpp"
#include "gbsde/types.hpp"

namespace gbsde {

struct CascadeConfig {
    SpaceGrid grid;
    int param_nodes = 21;  // parameter axes share the grid's range
    SolveOptions solve;    // store_stride_time defaults to horizon/256 when 0
    double z_trunc_factor = 1.1;  // driver z argument clamped at this multiple of M_z; 0 disables
};

/// Backward solution of the interval PDEs with terminal stitching. Interval k
/// holds one GridSolution slice per frozen combination of the earlier
/// increments x^{(k-1)} on a parameter tensor grid.
class CascadeSolution {
  public:
    TimePartition partition;
    VolatilityBand band;
    DerivativeLedger ledger;
    GeneratorSpec generator;  // effective driver (z-truncated) used in the solve
    double m_y = 0.0;         // |Y| sanity ceiling (violations warn, never fail)
    double m_z = 0.0;         // z truncation bound

    struct Interval {
        std::vector<SpaceGrid> param_axes;
        std::vector<long> strides;
        std::vector<GridSolution> slices;  // row-major over the parameter axes
    };
    std::vector<Interval> intervals;  // index k-1

    double y0() const;

    /// u^k and derivatives at (t, B^k): the first k-1 coordinates select the
    /// frozen parameters, the last is the live increment. Throws RangeError
    /// when a coordinate leaves the grid.
    GridSolution::Slice eval(int k, double t, Eigen::Ref<const Vector> bk) const;

    CascadeSolution(TimePartition p, VolatilityBand b, DerivativeLedger l)
        : partition(std::move(p)), band(b), ledger(std::move(l)) {}
};

CascadeSolution solve_cascade(const GeneratorSpec& f, const TerminalSpec& phi,
                              const TimePartition& partition, const VolatilityBand& band,
                              const CascadeConfig& config);

/// Cascade in the running-sum variable: valid when both the driver and the
/// terminal read the increments only through their cumulative sum. The whole
/// backward recursion collapses to one sweep on [0, T].
struct ReducedCascade {
    TimePartition partition;
    VolatilityBand band;
    DerivativeLedger ledger;
    ReducedGenerator generator;
    GridSolution solution;
    double m_y = 0.0;
    double m_z = 0.0;

    double y0() const { return solution.value(0.0, 0.0); }
};

ReducedCascade solve_cascade_reduced(const ReducedGenerator& f,
                                     const std::function<double(double)>& terminal_sum,
                                     double terminal_bound, double terminal_lip,
                                     const TimePartition& partition, const VolatilityBand& band,
                                     const CascadeConfig& config);

/// Sampled (Y, Z, K) along scenario paths. K is accumulated by trapezoidal
/// quadrature of eta d<B> - 2 G(eta) ds with eta = D^2u/2 + f, using realized
/// quadratic-variation increments; it is nonincreasing step by step because
/// every realized qv increment lies inside the band.
struct SolutionTriplePaths {
    Array times;
    double m_y = 0.0, m_z = 0.0;

    struct PathTriple {
        int member = -1, index = -1;
        Array b, qv, y, z, k;
    };
    std::vector<PathTriple> paths;

    struct Rejection {
        int member = -1, index = -1;
        double time = 0.0;
    };
    std::vector<Rejection> rejections;  // paths that left the spatial grid
    bool y_bound_warning = false;
};

SolutionTriplePaths build_solution_paths(const CascadeSolution& cascade,
                                         const ScenarioFamily& family);
SolutionTriplePaths build_solution_paths(const ReducedCascade& cascade,
                                         const ScenarioFamily& family);

/// Variants over pre-simulated paths (refinement studies on common noise).
/// Path indices within each control follow the order of appearance.
SolutionTriplePaths build_solution_paths(const CascadeSolution& cascade,
                                         const std::vector<ScenarioPath>& sims);
SolutionTriplePaths build_solution_paths(const ReducedCascade& cascade,
                                         const std::vector<ScenarioPath>& sims);

/// Pathwise defect of the backward equation at every grid time:
/// R_t = Y_t - [Y_T + int_t^T f d<B> - int_t^T Z dB - (K_T - K_t)]
/// with the discrete integrals of the scenarios module.
struct ResidualStats {
    struct PerPath {
        int member = -1, index = -1;
        double max_abs = 0.0;
    };
    std::vector<PerPath> per_path;
    double max_abs = 0.0;
    int non_finite_paths = 0;
};

ResidualStats residual_check(const SolutionTriplePaths& paths, const CascadeSolution& cascade);
ResidualStats residual_check(const SolutionTriplePaths& paths, const ReducedCascade& cascade);

}  // namespace gbsde
