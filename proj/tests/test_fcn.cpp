#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "octseg/fcn.hpp"
#include "octseg/model.hpp"

using namespace octseg;

namespace {

NetworkConfig tiny_config() {
    NetworkConfig cfg;
    cfg.stem_channels = 4;
    cfg.levels = 1;
    cfg.blocks = {{2, 4}, {2, 4}};
    cfg.seed = 42;
    return cfg;
}

ImageF random_image(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    ImageF img(h, w);
    for (double& v : img.data()) v = dist(rng);
    return img;
}

LabelGrid random_labels(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> dist(0, kNumClasses - 1);
    LabelGrid lbl(h, w);
    for (auto& v : lbl.data()) v = static_cast<std::uint8_t>(dist(rng));
    return lbl;
}

std::array<double, kNumClasses> ones() {
    std::array<double, kNumClasses> w;
    w.fill(1.0);
    return w;
}

}  // namespace

TEST_CASE("forward output is a normalized probability map of the input shape") {
    NetworkConfig cfg = tiny_config();
    DenseFcn net(cfg);
    Parameters params = net.init_parameters();
    for (auto [h, w] : {std::pair{16, 16}, {13, 19}, {8, 30}}) {
        ImageF img = random_image(h, w, 7 * h + w);
        FeatureMap probs = net.forward(img, params);
        CHECK(probs.channels() == kNumClasses);
        CHECK(probs.height() == h);
        CHECK(probs.width() == w);
        CHECK(is_probability_map(probs, 1e-6));
    }
}

TEST_CASE("zero head weights give uniform class probabilities") {
    NetworkConfig cfg = tiny_config();
    DenseFcn net(cfg);
    Parameters params = net.init_parameters();
    std::fill(params.at("head.w").values.begin(), params.at("head.w").values.end(), 0.0);
    std::fill(params.at("head.b").values.begin(), params.at("head.b").values.end(), 0.0);
    FeatureMap probs = net.forward(random_image(12, 12, 3), params);
    for (int c = 0; c < kNumClasses; ++c)
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 12; ++x)
                CHECK(probs.at(c, y, x) == doctest::Approx(1.0 / 6).epsilon(1e-12));
}

TEST_CASE("dense block concatenates input plus layers x growth channels") {
    NetworkConfig cfg;
    cfg.stem_channels = 5;
    cfg.levels = 2;
    cfg.blocks = {{3, 8}, {2, 4}, {4, 2}};
    DenseFcn net(cfg);
    CHECK(net.block_concat_channels(0) == 5 + 3 * 8);       // stem feeds level 0
    CHECK(net.block_concat_channels(1) == 29 + 2 * 4);      // pooled TD keeps 29 channels
    CHECK(net.block_concat_channels(2) == 37 + 4 * 2);      // bottom
    // conv layer wiring reflects the dense connectivity
    auto layers = net.conv_layers();
    bool found = false;
    for (const auto& li : layers)
        if (li.name == "down0.layer2") {
            CHECK(li.in_channels == 5 + 2 * 8);
            found = true;
        }
    CHECK(found);
}

TEST_CASE("perfect predictions give zero loss") {
    LabelGrid labels = random_labels(6, 5, 11);
    FeatureMap probs = one_hot(labels);
    LossResult r = weighted_cross_entropy(probs, labels, ones());
    CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("uniform probabilities cost ln 6") {
    LabelGrid labels = random_labels(7, 9, 13);
    FeatureMap probs(kNumClasses, 7, 9, 1.0 / kNumClasses);
    LossResult r = weighted_cross_entropy(probs, labels, ones());
    CHECK(r.loss == doctest::Approx(std::log(6.0)).epsilon(1e-9));
}

TEST_CASE("a weight-10 pixel contributes exactly ten times the unnormalized loss") {
    // two pixels, same prediction quality, labels 0 (weight 1) and 1 (weight 10)
    LabelGrid labels(1, 2);
    labels(0, 0) = 0;
    labels(0, 1) = 1;
    FeatureMap probs(kNumClasses, 1, 2, 0.08);
    probs.at(0, 0, 0) = 0.6;
    probs.at(1, 0, 1) = 0.6;
    std::array<double, kNumClasses> w = ones();
    w[1] = 10.0;
    LossResult r = weighted_cross_entropy(probs, labels, w);
    double per_pixel = -std::log(0.6);
    // numerator = 1*L + 10*L, normalizer = 11
    CHECK(r.loss * r.weight_sum == doctest::Approx(11.0 * per_pixel).epsilon(1e-12));
    CHECK(r.loss * r.weight_sum - per_pixel ==
          doctest::Approx(10.0 * per_pixel).epsilon(1e-12));
    // the gradient seed scales the same way
    for (int c = 0; c < kNumClasses; ++c)
        CHECK(r.dlogits.at(c, 0, 1) ==
              doctest::Approx(10.0 * (probs.at(c, 0, 1) - (c == 1 ? 1.0 : 0.0)) / 11.0)
                  .epsilon(1e-12));

    // mixed-quality closed form
    FeatureMap probs2(kNumClasses, 1, 2, 0.02);
    probs2.at(0, 0, 0) = 0.9;
    probs2.at(1, 0, 1) = 0.5;
    LossResult r2 = weighted_cross_entropy(probs2, labels, w);
    CHECK(r2.loss ==
          doctest::Approx((1.0 * -std::log(0.9) + 10.0 * -std::log(0.5)) / 11.0).epsilon(1e-12));
}

TEST_CASE("masked pixels contribute nothing") {
    LabelGrid labels = random_labels(4, 4, 17);
    FeatureMap probs(kNumClasses, 4, 4, 1.0 / kNumClasses);
    // make masked pixels grotesquely wrong
    MaskGrid mask(4, 4, 0);
    mask(0, 0) = 1;
    mask(3, 3) = 1;
    for (int c = 0; c < kNumClasses; ++c) {
        probs.at(c, 0, 0) = c == labels(0, 0) ? 1e-12 : 0.2;
        probs.at(c, 3, 3) = c == labels(3, 3) ? 1e-12 : 0.2;
    }
    LossResult r = weighted_cross_entropy(probs, labels, ones(), &mask);
    CHECK(r.loss == doctest::Approx(std::log(6.0)).epsilon(1e-9));
    CHECK(r.weight_sum == 14.0);
    for (int c = 0; c < kNumClasses; ++c) {
        CHECK(r.dlogits.at(c, 0, 0) == 0.0);
        CHECK(r.dlogits.at(c, 3, 3) == 0.0);
    }
}

TEST_CASE("scaling all class weights leaves the normalized loss and gradients unchanged") {
    LabelGrid labels = random_labels(5, 6, 19);
    std::mt19937_64 rng(23);
    FeatureMap logits(kNumClasses, 5, 6);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& v : logits.data()) v = dist(rng);
    FeatureMap probs = softmax_channels(logits);
    std::array<double, kNumClasses> w{1, 2, 3, 4, 5, 6};
    std::array<double, kNumClasses> w3;
    for (int i = 0; i < kNumClasses; ++i) w3[i] = 3.0 * w[i];
    LossResult a = weighted_cross_entropy(probs, labels, w);
    LossResult b = weighted_cross_entropy(probs, labels, w3);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
    for (std::size_t i = 0; i < a.dlogits.data().size(); ++i)
        CHECK(a.dlogits.data()[i] == doctest::Approx(b.dlogits.data()[i]).epsilon(1e-12));
}

TEST_CASE("predict_labels takes the argmax with ties to the smaller index") {
    FeatureMap probs(kNumClasses, 1, 3, 0.0);
    probs.at(4, 0, 0) = 1.0;                    // one-hot
    probs.at(2, 0, 1) = probs.at(3, 0, 1) = 0.5;  // exact tie -> 2
    std::mt19937_64 rng(29);
    for (int c = 0; c < kNumClasses; ++c)
        probs.at(c, 0, 2) = static_cast<double>(rng() % 100);
    LabelGrid lbl = predict_labels(probs);
    CHECK(lbl(0, 0) == 4);
    CHECK(lbl(0, 1) == 2);
    int best = lbl(0, 2);
    for (int c = 0; c < kNumClasses; ++c) CHECK(probs.at(best, 0, 2) >= probs.at(c, 0, 2));
}

TEST_CASE("gradients match finite differences on a linear degenerate config") {
    NetworkConfig cfg;
    cfg.levels = 0;
    cfg.blocks = {{1, 4}};
    cfg.stem_channels = 3;
    cfg.activation = Activation::identity;
    cfg.seed = 51;
    GradCheckReport rep = gradient_check(cfg, 9, 9, 51);
    CAPTURE(rep.worst_group);
    CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("gradients match finite differences on a small dense config") {
    NetworkConfig cfg;
    cfg.levels = 1;
    cfg.blocks = {{1, 3}, {1, 3}};
    cfg.stem_channels = 3;
    cfg.seed = 53;
    GradCheckReport rep = gradient_check(cfg, 8, 8, 53);
    CAPTURE(rep.worst_group);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("gradient check covers the affine scaling parameters") {
    NetworkConfig cfg;
    cfg.levels = 0;
    cfg.blocks = {{1, 3}};
    cfg.stem_channels = 3;
    cfg.channel_affine = true;
    cfg.seed = 59;
    DenseFcn net(cfg);
    Parameters params = net.init_parameters();
    CHECK(params.has("stem.gamma"));
    ImageF img = random_image(8, 8, 59);
    LabelGrid labels = random_labels(8, 8, 60);
    Parameters grads = analytic_gradients(net, params, img, labels, ones());
    GradCheckReport rep = compare_to_fd(net, params, grads, img, labels, ones());
    CAPTURE(rep.worst_group);
    CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("a corrupted gradient group is flagged") {
    NetworkConfig cfg;
    cfg.levels = 0;
    cfg.blocks = {{1, 3}};
    cfg.stem_channels = 3;
    cfg.seed = 61;
    DenseFcn net(cfg);
    Parameters params = net.init_parameters();
    ImageF img = random_image(8, 8, 61);
    LabelGrid labels = random_labels(8, 8, 62);
    Parameters grads = analytic_gradients(net, params, img, labels, ones());
    for (double& v : grads.at("bottom.layer0.w").values) v += 0.25;  // sabotage
    GradCheckReport rep = compare_to_fd(net, params, grads, img, labels, ones());
    CHECK(rep.max_rel_err > 1e-2);
    CHECK(rep.worst_group == "bottom.layer0.w");
}

TEST_CASE("translation equivariance of the convolutional core") {
    NetworkConfig cfg = tiny_config();
    DenseFcn net(cfg);
    Parameters params = net.init_parameters();
    const int h = 16, w = 128;
    const int shift = cfg.stride();
    ImageF img = random_image(h, w, 67);
    ImageF shifted(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) shifted(r, c) = c >= shift ? img(r, c - shift) : 0.0;

    FeatureMap a = net.forward(img, params);
    FeatureMap b = net.forward(shifted, params);
    const int margin = 48;  // beyond the receptive field of the tiny net
    for (int ch = 0; ch < kNumClasses; ++ch)
        for (int r = 0; r < h; ++r)
            for (int c = margin; c < w - margin; ++c)
                CHECK(b.at(ch, r, c + shift) == doctest::Approx(a.at(ch, r, c)).epsilon(1e-9));
}

TEST_CASE("training overfits a tiny instance and is bit-deterministic") {
    SurfaceSet s(16);
    double rows[5] = {3, 6, 9, 12, 14};
    for (int k = 0; k < kNumSurfaces; ++k)
        s.set_surface(k, std::vector<double>(16, rows[k]));
    LabelGrid labels = rasterize_surfaces(s, 16, 16);
    ImageF img(16, 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) img(r, c) = 0.1 + 0.15 * labels(r, c);

    NetworkConfig ncfg = tiny_config();
    TrainingConfig tcfg;
    tcfg.epochs = 30;
    tcfg.learning_rate = 0.2;
    tcfg.minority_classes = {1, 2};
    std::vector<TrainSample> data{{&img, &labels, nullptr}};

    TrainResult a = train(data, tcfg, ncfg);
    CHECK(a.loss_history.back() < a.loss_history.front());
    CHECK(a.params.all_finite());
    CHECK(a.class_weights[1] == 10.0);
    CHECK(a.class_weights[0] == 1.0);

    TrainResult b = train(data, tcfg, ncfg);
    CHECK(a.loss_history == b.loss_history);
    for (std::size_t g = 0; g < a.params.groups().size(); ++g)
        CHECK(a.params.groups()[g].values == b.params.groups()[g].values);
}

TEST_CASE("auto minority classes are the two thinnest bands") {
    SurfaceSet s(12);
    double rows[5] = {10, 12, 13, 20, 30};  // bands 1 (2px) and 2 (1px) thinnest
    for (int k = 0; k < kNumSurfaces; ++k)
        s.set_surface(k, std::vector<double>(12, rows[k]));
    LabelGrid labels = rasterize_surfaces(s, 40, 12);
    ImageF img(40, 12, 0.5);
    NetworkConfig ncfg = tiny_config();
    TrainingConfig tcfg;
    tcfg.epochs = 1;
    tcfg.learning_rate = 1e-3;
    TrainResult r = train({{&img, &labels, nullptr}}, tcfg, ncfg);
    CHECK(r.class_weights[1] == 10.0);
    CHECK(r.class_weights[2] == 10.0);
    CHECK(r.class_weights[0] == 1.0);
    CHECK(r.class_weights[5] == 1.0);
}

TEST_CASE("divergent training aborts with a numerical error") {
    ImageF img = random_image(12, 12, 71);
    LabelGrid labels = random_labels(12, 12, 72);
    // identity activation lets the parameters actually blow up; tanh would
    // saturate into a flat (finite) plateau instead
    NetworkConfig ncfg;
    ncfg.levels = 0;
    ncfg.blocks = {{2, 6}};
    ncfg.stem_channels = 6;
    ncfg.activation = Activation::identity;
    TrainingConfig tcfg;
    tcfg.epochs = 200;
    tcfg.learning_rate = 1e6;  // guaranteed blow-up
    CHECK_THROWS_AS(train({{&img, &labels, nullptr}}, tcfg, ncfg), NumericalError);
}
