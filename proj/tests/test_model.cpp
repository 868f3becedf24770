#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "octseg/model.hpp"

using namespace octseg;

namespace {

SurfaceSet constant_surfaces(int width, std::initializer_list<double> rows) {
    SurfaceSet s(width);
    int i = 0;
    for (double r : rows) {
        s.set_surface(i++, std::vector<double>(width, r));
    }
    return s;
}

SurfaceSet random_ordered_integer_surfaces(int width, int height, std::mt19937_64& rng) {
    SurfaceSet s(width);
    std::uniform_int_distribution<int> row(0, height - 1);
    for (int c = 0; c < width; ++c) {
        std::array<int, kNumSurfaces> vals;
        for (auto& v : vals) v = row(rng);
        std::sort(vals.begin(), vals.end());
        for (int k = 0; k < kNumSurfaces; ++k) s.set(k, c, vals[k]);
    }
    return s;
}

}  // namespace

TEST_CASE("rasterize bands a single column") {
    SurfaceSet s = constant_surfaces(1, {10, 14, 18, 22, 26});
    LabelGrid labels = rasterize_surfaces(s, 30, 1);
    for (int r = 0; r < 30; ++r) {
        int expect = r < 10 ? 0 : r < 14 ? 1 : r < 18 ? 2 : r < 22 ? 3 : r < 26 ? 4 : 5;
        CHECK(labels(r, 0) == expect);
    }
}

TEST_CASE("rasterize degenerate coincident surfaces") {
    SurfaceSet s = constant_surfaces(1, {12.5, 12.5, 12.5, 12.5, 12.5});
    LabelGrid labels = rasterize_surfaces(s, 24, 1);
    for (int r = 0; r < 24; ++r) CHECK(labels(r, 0) == (r < 13 ? 0 : 5));
}

TEST_CASE("rasterize random ordered set is nondecreasing per column") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        int width = 5 + static_cast<int>(rng() % 20);
        int height = 8 + static_cast<int>(rng() % 24);
        SurfaceSet s = random_ordered_integer_surfaces(width, height, rng);
        LabelGrid labels = rasterize_surfaces(s, height, width);
        for (int c = 0; c < width; ++c)
            for (int r = 1; r < height; ++r) CHECK(labels(r, c) >= labels(r - 1, c));
        // band widths sum to the image height
        for (int c = 0; c < width; ++c) {
            std::array<int, kNumClasses> band{};
            for (int r = 0; r < height; ++r) ++band[labels(r, c)];
            int total = 0;
            for (int b : band) total += b;
            CHECK(total == height);
        }
    }
}

TEST_CASE("rasterize rejects unordered or partially valid input") {
    SurfaceSet s = constant_surfaces(4, {20, 10, 25, 30, 35});  // surface 2 above surface 1
    CHECK_THROWS_AS(rasterize_surfaces(s, 40, 4), ValidationError);
    SurfaceSet t = constant_surfaces(4, {5, 10, 15, 20, 25});
    t.invalidate(2, 1);
    CHECK_THROWS_AS(rasterize_surfaces(t, 40, 4), ValidationError);
}

TEST_CASE("ordering validation") {
    SurfaceSet s = constant_surfaces(3, {10, 14, 18, 22, 26});
    auto rep = validate_surface_ordering(s);
    CHECK(rep.ordered);
    CHECK(rep.violations.empty());

    // surface 2 below surface 4 in one column
    s.set(1, 1, 19.0);
    rep = validate_surface_ordering(s);
    CHECK_FALSE(rep.ordered);
    REQUIRE(rep.violations.size() == 1);
    CHECK(rep.violations[0] == OrderingViolation{4, 1});

    SurfaceSet empty(5);  // nothing valid: vacuously ordered
    CHECK(validate_surface_ordering(empty).ordered);
}

TEST_CASE("intersect_validity basics") {
    SurfaceSet a(3), b(3);
    for (int s = 0; s < kNumSurfaces; ++s)
        for (int c = 0; c < 3; ++c) {
            a.set(s, c, 1.0);
            b.set(s, c, 2.0);
        }
    a.invalidate(0, 2);
    b.invalidate(0, 1);
    auto m = intersect_validity({&a, &b});
    CHECK(m.get(0, 0));
    CHECK_FALSE(m.get(0, 1));
    CHECK_FALSE(m.get(0, 2));

    CHECK(intersect_validity({&a}) == validity_of(a));

    SurfaceSet none(3);  // all-false input absorbs
    auto z = intersect_validity({&a, &none});
    for (int s = 0; s < kNumSurfaces; ++s)
        for (int c = 0; c < 3; ++c) CHECK_FALSE(z.get(s, c));

    SurfaceSet wide(4);
    CHECK_THROWS_AS(intersect_validity({&a, &wide}), ValidationError);
}

TEST_CASE("intersect_validity is commutative, associative, idempotent") {
    std::mt19937_64 rng(11);
    auto random_set = [&](int width) {
        SurfaceSet s(width);
        for (int k = 0; k < kNumSurfaces; ++k)
            for (int c = 0; c < width; ++c)
                if (rng() % 2) s.set(k, c, static_cast<double>(rng() % 50));
        return s;
    };
    for (int trial = 0; trial < 10; ++trial) {
        SurfaceSet a = random_set(9), b = random_set(9), c = random_set(9);
        CHECK(intersect_validity({&a, &b}) == intersect_validity({&b, &a}));
        auto ab_c = intersect_validity(
            std::vector<const SurfaceSet*>{&a, &b, &c});
        SurfaceSet ab(9);
        {
            auto m = intersect_validity({&a, &b});
            for (int k = 0; k < kNumSurfaces; ++k)
                for (int col = 0; col < 9; ++col)
                    if (m.get(k, col)) ab.set(k, col, 0.0);
        }
        CHECK(ab_c == intersect_validity({&ab, &c}));
        CHECK(intersect_validity({&a, &a}) == validity_of(a));
    }
}

TEST_CASE("one_hot produces a valid probability map") {
    LabelGrid labels(4, 3);
    labels(0, 0) = 5;
    labels(2, 1) = 3;
    FeatureMap probs = one_hot(labels);
    CHECK(is_probability_map(probs));
    CHECK(probs.at(5, 0, 0) == 1.0);
    CHECK(probs.at(3, 2, 1) == 1.0);
    CHECK(probs.at(0, 2, 1) == 0.0);
}

TEST_CASE("patient record region distribution enforced") {
    PatientRecord p;
    p.patient_id = "p0";
    for (int i = 0; i < 5; ++i) {
        ScanRecord rec;
        rec.scan.pixels = ImageF(4, 4, 0.5);
        rec.scan.patient_id = "p0";
        rec.scan.image_id = "img" + std::to_string(i);
        rec.scan.region = Region::fovea;  // wrong distribution: 5 fovea
        rec.ground_truth = SurfaceSet(4);
        p.scans.push_back(std::move(rec));
    }
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p.scans[1].scan.region = Region::parafovea;
    p.scans[2].scan.region = Region::parafovea;
    p.scans[3].scan.region = Region::perifovea;
    p.scans[4].scan.region = Region::perifovea;
    CHECK_NOTHROW(p.validate());
}
