#pragma once

#include <vector>

#include "octseg/extraction.hpp"
#include "octseg/model.hpp"

namespace octseg {

// k(x,x') = variance * exp(-(x-x')^2 / (2 * length_scale^2)).
// Units follow the source convention: variance is stored as 50 even though
// dimensionally it is px^2 (see README notes).
struct RbfKernel {
    double variance = 50.0;      // px^2
    double length_scale = 50.0;  // px
};

struct GpConfig {
    RbfKernel kernel;
    double noise_variance = 1.0;  // px^2
    double jitter = 1e-8;
    // Optional candidate subsampling for very wide images; 1 = use everything.
    int subsample_stride = 1;

    void validate() const;
};

double kernel_value(double x0, double x1, const RbfKernel& k);

// Regression inputs; duplicate columns are legitimate independent
// observations.
struct Observations {
    std::vector<double> columns;
    std::vector<double> rows;
};

// Posterior mean of a zero-centered GP plus the empirical mean of the
// observations: m + K*^T (K + (noise+jitter) I)^-1 (y - m), solved by
// Cholesky factorization. Escalates jitter x10 up to 1e-2 before giving up
// with a NumericalError.
std::vector<double> posterior_mean(const Observations& obs,
                                   const std::vector<double>& query_columns,
                                   const GpConfig& config);

// One surface: fit on all candidates of all columns, evaluate at every
// column, clamp into [0, height-1]. Requires at least one candidate.
std::vector<double> smooth_surface(const std::vector<std::vector<double>>& candidates,
                                   int width, int height, const GpConfig& config);

// SEG+REG: per-surface GP smoothing of the raw candidate sets (the regression
// replaces the SEG repair heuristics rather than stacking on them). Surfaces
// without any candidate are reported unresolved, as in SEG.
SegResult seg_reg_pipeline(const FeatureMap& probs, const GpConfig& config);

}  // namespace octseg
