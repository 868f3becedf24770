#include "octseg/kernels.hpp"

namespace octseg::kernels {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void sqdiff_scalar(double c, const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double d = x[i] - c;
        out[i] = d * d;
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{"scalar", dot_scalar, axpy_scalar, scal_scalar,
                         sum_scalar, sqdiff_scalar};
    return ops;
}

}  // namespace octseg::kernels
