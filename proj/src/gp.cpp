#include "octseg/gp.hpp"

#include <algorithm>
#include <cmath>

#include "octseg/fcn.hpp"
#include "octseg/kernels.hpp"

namespace octseg {

void GpConfig::validate() const {
    if (!(kernel.variance > 0.0) || !(kernel.length_scale > 0.0))
        throw ValidationError("GpConfig: kernel variance and length scale must be positive");
    if (noise_variance < 0.0) throw ValidationError("GpConfig: negative noise variance");
    if (!(jitter > 0.0)) throw ValidationError("GpConfig: jitter must be positive");
    if (subsample_stride < 1) throw ValidationError("GpConfig: subsample stride must be >= 1");
}

double kernel_value(double x0, double x1, const RbfKernel& k) {
    double d = x0 - x1;
    return k.variance * std::exp(-(d * d) / (2.0 * k.length_scale * k.length_scale));
}

namespace {

// In-place lower Cholesky of the n x n row-major SPD matrix. Returns false on
// a non-positive pivot.
bool cholesky_inplace(std::vector<double>& a, int n) {
    const auto& ops = kernels::active();
    for (int j = 0; j < n; ++j) {
        double* rj = a.data() + static_cast<std::size_t>(j) * n;
        double d = rj[j] - ops.dot(rj, rj, j);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        d = std::sqrt(d);
        rj[j] = d;
        for (int i = j + 1; i < n; ++i) {
            double* ri = a.data() + static_cast<std::size_t>(i) * n;
            ri[j] = (ri[j] - ops.dot(ri, rj, j)) / d;
        }
    }
    return true;
}

// Solve L L^T x = b with the factor from cholesky_inplace.
std::vector<double> cholesky_solve(const std::vector<double>& l, int n,
                                   const std::vector<double>& b) {
    const auto& ops = kernels::active();
    std::vector<double> x(b);
    for (int i = 0; i < n; ++i) {
        const double* ri = l.data() + static_cast<std::size_t>(i) * n;
        x[i] = (x[i] - ops.dot(ri, x.data(), i)) / ri[i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double xi = x[i];
        for (int k = i + 1; k < n; ++k)
            xi -= l[static_cast<std::size_t>(k) * n + i] * x[k];
        x[i] = xi / l[static_cast<std::size_t>(i) * n + i];
    }
    return x;
}

}  // namespace

std::vector<double> posterior_mean(const Observations& obs,
                                   const std::vector<double>& query_columns,
                                   const GpConfig& config) {
    config.validate();
    const int n = static_cast<int>(obs.columns.size());
    if (n == 0) throw ValidationError("posterior_mean: no observations");
    if (obs.rows.size() != obs.columns.size())
        throw ValidationError("posterior_mean: columns/rows length mismatch");

    const auto& ops = kernels::active();
    const RbfKernel& k = config.kernel;
    const double inv_two_ls2 = 1.0 / (2.0 * k.length_scale * k.length_scale);

    // K(i,j) = variance * exp(-(x_i-x_j)^2 / (2 l^2)); symmetric by
    // construction (each distance squared computed once per pair).
    std::vector<double> gram(static_cast<std::size_t>(n) * n);
    std::vector<double> sq(n);
    for (int i = 0; i < n; ++i) {
        ops.sqdiff(obs.columns[i], obs.columns.data(), sq.data(), n);
        double* row = gram.data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) row[j] = k.variance * std::exp(-sq[j] * inv_two_ls2);
    }

    double mean = ops.sum(obs.rows.data(), n) / n;
    std::vector<double> centered(n);
    for (int i = 0; i < n; ++i) centered[i] = obs.rows[i] - mean;

    std::vector<double> alpha;
    double jitter = config.jitter;
    for (;;) {
        std::vector<double> factor(gram);
        double diag = config.noise_variance + jitter;
        for (int i = 0; i < n; ++i) factor[static_cast<std::size_t>(i) * n + i] += diag;
        if (cholesky_inplace(factor, n)) {
            alpha = cholesky_solve(factor, n, centered);
            break;
        }
        if (jitter >= 1e-2)
            throw NumericalError(format_string(
                "posterior_mean: Cholesky failed for %d observations even with jitter %g "
                "(noise %g, variance %g, length scale %g); system too ill-conditioned",
                n, jitter, config.noise_variance, k.variance, k.length_scale));
        jitter = std::min(jitter * 10.0, 1e-2);
        log_debug("posterior_mean: escalating jitter to %g", jitter);
    }

    std::vector<double> out(query_columns.size());
    std::vector<double> kstar(n);
    for (std::size_t q = 0; q < query_columns.size(); ++q) {
        ops.sqdiff(query_columns[q], obs.columns.data(), sq.data(), n);
        for (int i = 0; i < n; ++i) kstar[i] = k.variance * std::exp(-sq[i] * inv_two_ls2);
        double v = mean + ops.dot(kstar.data(), alpha.data(), n);
        if (!std::isfinite(v))
            throw NumericalError("posterior_mean: non-finite posterior value");
        out[q] = v;
    }
    return out;
}

std::vector<double> smooth_surface(const std::vector<std::vector<double>>& candidates,
                                   int width, int height, const GpConfig& config) {
    if (static_cast<int>(candidates.size()) != width)
        throw ValidationError("smooth_surface: candidate list width mismatch");
    Observations obs;
    for (int c = 0; c < width; c += config.subsample_stride) {
        for (double r : candidates[c]) {
            obs.columns.push_back(static_cast<double>(c));
            obs.rows.push_back(r);
        }
    }
    if (obs.columns.empty())
        throw ValidationError("smooth_surface: no candidates for surface");

    std::vector<double> query(width);
    for (int c = 0; c < width; ++c) query[c] = static_cast<double>(c);
    std::vector<double> fit = posterior_mean(obs, query, config);
    for (double& v : fit) v = std::clamp(v, 0.0, static_cast<double>(height - 1));
    return fit;
}

SegResult seg_reg_pipeline(const FeatureMap& probs, const GpConfig& config) {
    CandidateSet cands = extract_candidates(predict_labels(probs));
    SegResult result;
    result.surfaces = SurfaceSet(cands.width);
    for (int s = 0; s < kNumSurfaces; ++s) {
        bool any = false;
        for (const auto& col : cands.rows[s])
            if (!col.empty()) { any = true; break; }
        if (!any) {
            result.unresolved.push_back(kSurfaceIds[s]);
            continue;
        }
        result.surfaces.set_surface(
            s, smooth_surface(cands.rows[s], cands.width, cands.height, config));
    }
    return result;
}

}  // namespace octseg
