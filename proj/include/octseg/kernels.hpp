#pragma once

#include <cstddef>

namespace octseg::kernels {

// Hot inner loops of the conv net and the GP solver. Every entry has a scalar
// reference implementation and may have vector variants; the active table is
// picked once at startup from CPU features and can be overridden (tests use
// this for scalar/SIMD equivalence checks).
//
// Elementwise kernels (axpy, scal, sqdiff) are bit-identical across backends
// (single rounding per element, no FMA contraction). Reductions (dot, sum) use
// multiple accumulators in the vector variants and agree with the scalar
// reference only up to roundoff.
struct Ops {
    const char* name;
    // sum_i x[i]*y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y[i] += a*x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // x[i] *= a
    void (*scal)(double a, double* x, std::size_t n);
    // sum_i x[i]
    double (*sum)(const double* x, std::size_t n);
    // out[i] = (x[i] - c)^2
    void (*sqdiff)(double c, const double* x, double* out, std::size_t n);
};

enum class Backend { auto_detect, scalar, avx2 };

// Active kernel table. Thread-safe to read; select() is not meant to be
// called concurrently with running numerics.
const Ops& active();

// Force a backend (throws ValidationError if unavailable on this CPU/build).
void select(Backend b);

Backend selected();
bool avx2_available();

const Ops& scalar_ops();
#if defined(OCTSEG_HAVE_AVX2)
const Ops& avx2_ops();
#endif

}  // namespace octseg::kernels
