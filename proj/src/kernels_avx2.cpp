// AVX2 kernel variants. This TU is the only one compiled with -mavx2/-mfma;
// nothing here may run unless the dispatcher verified CPU support.

#include "octseg/kernels.hpp"

#if defined(OCTSEG_HAVE_AVX2)

#include <immintrin.h>

namespace octseg::kernels {

namespace {

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

// mul+add (not fmadd) so results match the scalar reference bit-for-bit.
void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void scal_avx2(double a, double* x, std::size_t n) {
    __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) x[i] *= a;
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i];
    return acc;
}

void sqdiff_avx2(double c, const double* x, double* out, std::size_t n) {
    __m256d cv = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), cv);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(d, d));
    }
    for (; i < n; ++i) {
        double d = x[i] - c;
        out[i] = d * d;
    }
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops ops{"avx2", dot_avx2, axpy_avx2, scal_avx2, sum_avx2, sqdiff_avx2};
    return ops;
}

}  // namespace octseg::kernels

#endif  // OCTSEG_HAVE_AVX2
