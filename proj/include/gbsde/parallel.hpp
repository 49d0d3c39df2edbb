#pragma once

#include "gbsde/types.hpp"

#include <functional>

namespace gbsde {

/// Process-wide worker count for parallel loops (set from the CLI).
void set_thread_count(int threads);
int thread_count();

/// Static-chunked parallel loop. Results must land in preallocated
/// index-addressed slots so the outcome is schedule-independent.
void parallel_for(long n, const std::function<void(long)>& body);

/// Deterministic pairwise summation (fixed reduction tree).
double pairwise_sum(const double* data, long n);
double pairwise_sum(const Array& v);

struct MeanStdErr {
    double mean = 0.0;
    double std_error = 0.0;
    long count = 0;
};
/// Two-pass mean and Monte-Carlo standard error with pairwise reductions.
MeanStdErr mean_stderr(const Array& values);

}  // namespace gbsde
