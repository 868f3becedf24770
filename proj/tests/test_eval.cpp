#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "octseg/eval.hpp"

using namespace octseg;

namespace {

SurfaceSet constant_surfaces(int width, std::initializer_list<double> rows) {
    SurfaceSet s(width);
    int i = 0;
    for (double r : rows) s.set_surface(i++, std::vector<double>(width, r));
    return s;
}

}  // namespace

TEST_CASE("signed error follows e = ref - est") {
    CHECK(signed_error({10, 12}, {10, 12}, {1, 1}).values == std::vector<double>{0, 0});
    CHECK(signed_error({10}, {13}, {1}).values == std::vector<double>{-3});
    CHECK(signed_error({10, 99}, {11, 0}, {1, 0}).values == std::vector<double>{-1});
    CHECK_THROWS_AS(signed_error({1, 2}, {1}, {1, 1}), ValidationError);
}

TEST_CASE("unsigned stats") {
    ErrorStats s = unsigned_stats({{-3, 3}});
    CHECK(s.mean_unsigned == 3.0);
    CHECK(s.mean_signed == 0.0);
    CHECK(s.n == 2);

    s = unsigned_stats({{0, 0, 0}});
    CHECK(s.mean_unsigned == 0.0);
    CHECK(s.std_unsigned == 0.0);
    CHECK(s.max_unsigned == 0.0);

    s = unsigned_stats({{1, 2, 3}});
    CHECK(s.mean_unsigned == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(s.max_unsigned == 3.0);
    CHECK(s.std_unsigned == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));

    CHECK_THROWS_AS(unsigned_stats({}), ValidationError);
}

TEST_CASE("triangle inequality: mean unsigned >= |mean signed|") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> dist(0.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        ErrorVector e;
        int n = 1 + static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) e.values.push_back(dist(rng));
        ErrorStats s = unsigned_stats(e);
        CHECK(s.mean_unsigned >= std::abs(s.mean_signed) - 1e-12);
    }
}

TEST_CASE("make_folds is a leave-one-patient-out partition") {
    std::vector<std::string> ids;
    for (int i = 0; i < 10; ++i) ids.push_back("p" + std::to_string(i));
    auto folds = make_folds(ids, 10);
    REQUIRE(folds.size() == 10);
    std::set<std::string> tested;
    for (const auto& f : folds) {
        CHECK(f.train_patients.size() == 9);  // 9 x 5 = 45 training images
        for (const auto& t : f.train_patients) CHECK(t != f.test_patient);
        CHECK(tested.insert(f.test_patient).second);  // pairwise disjoint
    }
    CHECK(tested.size() == 10);  // union covers all patients

    CHECK_THROWS_AS(make_folds(ids, 5), ValidationError);

    auto small = make_folds({"a", "b", "c"}, 3);
    CHECK(small.size() == 3);
    CHECK(small[0].train_patients.size() == 2);  // 10 train / 5 test images
}

TEST_CASE("evaluate_methods on identity and constant offsets") {
    const int width = 16;
    SurfaceSet gt = constant_surfaces(width, {10, 20, 30, 40, 50});
    SurfaceSet plus1 = constant_surfaces(width, {11, 21, 31, 41, 51});

    std::vector<EvalScan> scans;
    std::vector<SurfaceSet> gts(3, gt);
    Region regions[3] = {Region::fovea, Region::parafovea, Region::perifovea};
    for (int i = 0; i < 3; ++i) {
        EvalScan es;
        es.region = regions[i];
        es.ground_truth = &gts[i];
        scans.push_back(es);
    }
    std::vector<MethodEstimates> methods{{"exact", {gt, gt, gt}},
                                         {"plus1", {plus1, plus1, plus1}}};
    ReportTable table = evaluate_methods(scans, methods);
    REQUIRE(table.methods == std::vector<std::string>{"exact", "plus1"});
    for (int s = 0; s < kNumSurfaces; ++s) {
        REQUIRE(table.rows[s].cells[0]);
        CHECK(table.rows[s].cells[0]->mean_unsigned == 0.0);
        REQUIRE(table.rows[s].cells[1]);
        CHECK(table.rows[s].cells[1]->mean_unsigned == doctest::Approx(1.0));
        CHECK(table.rows[s].cells[1]->mean_signed == doctest::Approx(-1.0));
        // shared mask: identical n cell-for-cell
        CHECK(table.rows[s].cells[0]->n == table.rows[s].cells[1]->n);
        CHECK(table.rows[s].cells[0]->n == 3 * width);
    }
    CHECK(table.summary.mean[1] == doctest::Approx(1.0));
    CHECK(table.summary.max[1] == doctest::Approx(1.0));
    CHECK(table.summary.std[1] == doctest::Approx(0.0));
    // regional rows populated for every region
    int regional_rows = 0;
    for (const auto& row : table.rows)
        if (row.region) ++regional_rows;
    CHECK(regional_rows == 15);
}

TEST_CASE("validity spans intersect into a shared mask with equal n") {
    const int width = 12;
    SurfaceSet gt = constant_surfaces(width, {10, 20, 30, 40, 50});
    SurfaceSet a = gt, b = gt;
    for (int c = 0; c < 4; ++c) a.invalidate(0, c);       // method a misses left span
    for (int c = 8; c < width; ++c) b.invalidate(0, c);   // method b misses right span

    EvalScan es;
    es.ground_truth = &gt;
    std::vector<MethodEstimates> methods{{"a", {a}}, {"b", {b}}};
    ReportTable table = evaluate_methods({es}, methods);
    REQUIRE(table.rows[0].cells[0]);
    CHECK(table.rows[0].cells[0]->n == 4);  // columns 4..7 only
    CHECK(table.rows[0].cells[1]->n == 4);
}

TEST_CASE("methods are symmetric under relabeling") {
    const int width = 10;
    SurfaceSet gt = constant_surfaces(width, {5, 10, 15, 20, 25});
    SurfaceSet x = constant_surfaces(width, {6, 10, 15, 20, 25});
    SurfaceSet y = constant_surfaces(width, {5, 12, 15, 20, 25});
    EvalScan es;
    es.ground_truth = &gt;
    ReportTable ab = evaluate_methods({es}, {{"x", {x}}, {"y", {y}}});
    ReportTable ba = evaluate_methods({es}, {{"y", {y}}, {"x", {x}}});
    for (std::size_t r = 0; r < ab.rows.size(); ++r) {
        REQUIRE(ab.rows[r].cells[0].has_value() == ba.rows[r].cells[1].has_value());
        if (ab.rows[r].cells[0]) {
            CHECK(ab.rows[r].cells[0]->mean_unsigned == ba.rows[r].cells[1]->mean_unsigned);
            CHECK(ab.rows[r].cells[1]->mean_unsigned == ba.rows[r].cells[0]->mean_unsigned);
        }
    }
}

TEST_CASE("empty cells are excluded and reported") {
    const int width = 8;
    SurfaceSet gt = constant_surfaces(width, {5, 10, 15, 20, 25});
    SurfaceSet est = gt;
    est.invalidate_surface(2);  // surface 4 never valid
    EvalScan es;
    es.ground_truth = &gt;
    ReportTable table = evaluate_methods({es}, {{"m", {est}}});
    CHECK_FALSE(table.rows[2].cells[0].has_value());
    CHECK(table.rows[0].cells[0].has_value());
    bool mentioned = false;
    for (const auto& note : table.excluded)
        if (note.find("surface 4") != std::string::npos) mentioned = true;
    CHECK(mentioned);
}

TEST_CASE("report csv round-trips") {
    const int width = 16;
    SurfaceSet gt = constant_surfaces(width, {10, 20, 30, 40, 50});
    SurfaceSet off = constant_surfaces(width, {10.5, 20.25, 31, 40, 52});
    EvalScan es;
    es.ground_truth = &gt;
    ReportTable table = evaluate_methods({es}, {{"SEG", {off}}, {"SEG+REG", {gt}}});
    std::string csv = render_csv(table);
    ReportTable back = parse_report_csv(csv);
    REQUIRE(back.methods == table.methods);
    REQUIRE(back.rows.size() == table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        REQUIRE(back.rows[r].cells.size() == table.rows[r].cells.size());
        for (std::size_t m = 0; m < table.rows[r].cells.size(); ++m) {
            REQUIRE(back.rows[r].cells[m].has_value() == table.rows[r].cells[m].has_value());
            if (table.rows[r].cells[m]) {
                CHECK(back.rows[r].cells[m]->mean_unsigned ==
                      table.rows[r].cells[m]->mean_unsigned);
                CHECK(back.rows[r].cells[m]->n == table.rows[r].cells[m]->n);
            }
        }
    }
    CHECK(back.summary.mean == table.summary.mean);
    CHECK(back.axial_um_per_px == table.axial_um_per_px);
    // text rendering exists for both views
    CHECK(render_text(table, false).find("surface 1") != std::string::npos);
    CHECK(render_text(table, true).find("fovea") != std::string::npos);
}

TEST_CASE("per-image averaging flag changes pooling, not masks") {
    const int width = 6;
    SurfaceSet gt = constant_surfaces(width, {5, 10, 15, 20, 25});
    SurfaceSet e1 = constant_surfaces(width, {6, 10, 15, 20, 25});    // err 1
    SurfaceSet e2 = constant_surfaces(width, {8, 10, 15, 20, 25});    // err 3
    std::vector<EvalScan> scans;
    std::vector<SurfaceSet> gts{gt, gt};
    for (int i = 0; i < 2; ++i) {
        EvalScan es;
        es.ground_truth = &gts[i];
        scans.push_back(es);
    }
    std::vector<MethodEstimates> methods{{"m", {e1, e2}}};
    ReportTable pooled = evaluate_methods(scans, methods);
    EvalOptions opt;
    opt.per_image_average = true;
    ReportTable averaged = evaluate_methods(scans, methods, opt);
    CHECK(pooled.rows[0].cells[0]->mean_unsigned == doctest::Approx(2.0));
    CHECK(averaged.rows[0].cells[0]->mean_unsigned == doctest::Approx(2.0));
    CHECK(pooled.rows[0].cells[0]->n == 12);   // per-pixel pooling
    CHECK(averaged.rows[0].cells[0]->n == 2);  // per-image observations
}
