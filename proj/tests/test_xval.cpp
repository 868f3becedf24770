#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "octseg/eval.hpp"
#include "octseg/synth.hpp"

using namespace octseg;

namespace {

XvalConfig micro_config() {
    XvalConfig cfg;
    cfg.pipeline = Pipeline::both;
    cfg.net.levels = 1;
    cfg.net.stem_channels = 4;
    cfg.net.blocks = {{1, 4}, {1, 4}};
    cfg.net.seed = 300;
    cfg.train.epochs = 3;
    cfg.train.learning_rate = 0.2;
    cfg.train.seed = 301;
    return cfg;
}

std::vector<PatientRecord> micro_dataset(int patients, std::uint64_t seed) {
    SynthConfig scfg;
    scfg.num_patients = patients;
    scfg.width = 24;
    scfg.height = 24;
    scfg.min_band_thickness_px = 3.0;
    scfg.smoothness_scale_px = 1.0;
    scfg.noise_std = 0.03;
    scfg.seed = seed;
    return generate_synthetic(scfg);
}

}  // namespace

TEST_CASE("cross validation populates every surface and region") {
    auto dataset = micro_dataset(3, 501);
    XvalConfig cfg = micro_config();
    XvalResult result = run_cross_validation(dataset, cfg);

    REQUIRE(result.folds.size() == 3);
    std::set<std::string> tested;
    for (const auto& fold : result.folds) {
        CHECK(fold.fold.train_patients.size() == 2);
        CHECK(fold.image_ids.size() == 5);  // every image tested exactly once
        tested.insert(fold.fold.test_patient);
        CHECK(fold.estimates.count("SEG"));
        CHECK(fold.estimates.count("SEG+REG"));
    }
    CHECK(tested.size() == 3);

    // columns: SEG, SEG+REG, Inter-Observer (synth emits a second grader)
    REQUIRE(result.table.methods ==
            std::vector<std::string>{"SEG", "SEG+REG", "Inter-Observer"});
    for (const auto& row : result.table.rows)
        for (const auto& cell : row.cells) CHECK(cell.has_value());
}

TEST_CASE("cross validation is bit-deterministic across reruns") {
    auto dataset = micro_dataset(3, 502);
    XvalConfig cfg = micro_config();
    XvalResult a = run_cross_validation(dataset, cfg);
    XvalResult b = run_cross_validation(dataset, cfg);
    CHECK(render_csv(a.table) == render_csv(b.table));
    for (std::size_t f = 0; f < a.folds.size(); ++f) {
        CHECK(a.folds[f].loss_history == b.folds[f].loss_history);
        for (std::size_t g = 0; g < a.folds[f].params.groups().size(); ++g)
            CHECK(a.folds[f].params.groups()[g].values ==
                  b.folds[f].params.groups()[g].values);
    }
}

TEST_CASE("external estimates become extra columns on the shared mask") {
    auto dataset = micro_dataset(3, 503);
    // attach a fake external method: ground truth shifted by 2
    for (auto& patient : dataset)
        for (auto& rec : patient.scans) {
            SurfaceSet est(rec.ground_truth.width());
            for (int k = 0; k < kNumSurfaces; ++k) {
                std::vector<double> v = rec.ground_truth.positions(k);
                for (double& x : v) x += 2.0;
                est.set_surface(k, v);
            }
            rec.external["Shifted"] = std::move(est);
        }
    XvalConfig cfg = micro_config();
    cfg.pipeline = Pipeline::seg;
    XvalResult result = run_cross_validation(dataset, cfg);
    REQUIRE(result.table.methods ==
            std::vector<std::string>{"SEG", "Shifted", "Inter-Observer"});
    const auto& row = result.table.rows[0];
    std::size_t shifted_col = 1;
    REQUIRE(row.cells[shifted_col].has_value());
    CHECK(row.cells[shifted_col]->mean_unsigned == doctest::Approx(2.0));
    CHECK(row.cells[shifted_col]->mean_signed == doctest::Approx(-2.0));
    // equal n on the shared mask
    CHECK(row.cells[0]->n == row.cells[shifted_col]->n);
}
