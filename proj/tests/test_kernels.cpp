#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "octseg/kernels.hpp"

using namespace octseg;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 100, 1023};

}  // namespace

TEST_CASE("scalar kernels match plain loops") {
    const auto& ops = kernels::scalar_ops();
    auto x = random_vec(64, 1);
    auto y = random_vec(64, 2);

    double expect = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) expect += x[i] * y[i];
    CHECK(ops.dot(x.data(), y.data(), x.size()) == doctest::Approx(expect).epsilon(1e-15));

    auto y2 = y;
    ops.axpy(0.5, x.data(), y2.data(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y2[i] == y[i] + 0.5 * x[i]);

    std::vector<double> sq(x.size());
    ops.sqdiff(0.25, x.data(), sq.data(), x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(sq[i] == (x[i] - 0.25) * (x[i] - 0.25));
}

#if defined(OCTSEG_HAVE_AVX2)
TEST_CASE("avx2 kernels agree with the scalar reference") {
    if (!kernels::avx2_available()) {
        MESSAGE("AVX2 not available on this CPU; skipping");
        return;
    }
    const auto& sc = kernels::scalar_ops();
    const auto& vx = kernels::avx2_ops();

    for (std::size_t n : kSizes) {
        CAPTURE(n);
        // +1 offset exercises unaligned loads
        auto xs = random_vec(n + 1, 100 + n);
        auto ys = random_vec(n + 1, 200 + n);
        const double* x = xs.data() + 1;
        const double* y = ys.data() + 1;

        // reductions: tolerance scaled by n (different accumulation order)
        double tol = 1e-13 * static_cast<double>(n + 1);
        CHECK(vx.dot(x, y, n) == doctest::Approx(sc.dot(x, y, n)).epsilon(tol));
        CHECK(vx.sum(x, n) == doctest::Approx(sc.sum(x, n)).epsilon(tol));

        // elementwise kernels: bit-exact
        auto a = ys, b = ys;
        sc.axpy(1.7, xs.data() + 1, a.data() + 1, n);
        vx.axpy(1.7, xs.data() + 1, b.data() + 1, n);
        CHECK(a == b);

        a = ys;
        b = ys;
        sc.scal(-0.3, a.data() + 1, n);
        vx.scal(-0.3, b.data() + 1, n);
        CHECK(a == b);

        std::vector<double> s1(n), s2(n);
        sc.sqdiff(0.7, x, s1.data(), n);
        vx.sqdiff(0.7, x, s2.data(), n);
        CHECK(s1 == s2);
    }
}
#endif

TEST_CASE("backend selection") {
    kernels::select(kernels::Backend::scalar);
    CHECK(std::string(kernels::active().name) == "scalar");
    kernels::select(kernels::Backend::auto_detect);
    if (kernels::avx2_available())
        CHECK(std::string(kernels::active().name) == "avx2");
    else
        CHECK(std::string(kernels::active().name) == "scalar");
}
