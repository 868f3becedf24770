#include "octseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace octseg {

void SynthConfig::validate() const {
    if (num_patients < 1) throw ValidationError("SynthConfig: num_patients < 1");
    if (width < 8 || height < 8) throw ValidationError("SynthConfig: image too small");
    if (!(min_band_thickness_px > 0)) throw ValidationError("SynthConfig: min thickness <= 0");
    if (min_band_thickness_px * 5.0 > height)
        throw ValidationError(format_string(
            "SynthConfig: infeasible, min thickness %.3g x 5 exceeds height %d",
            min_band_thickness_px, height));
    if (smoothness_scale_px < 0 || noise_std < 0 || grader2_noise_std < 0)
        throw ValidationError("SynthConfig: negative scale");
    for (double m : layer_means)
        if (m < 0.0 || m > 1.0)
            throw ValidationError("SynthConfig: layer means must lie in [0,1]");
}

namespace {

// Sum of low-frequency sinusoids with random phases, zero mean, peak ~amp.
std::vector<double> smooth_curve(int width, double amp, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> weight(0.5, 1.0);
    std::vector<double> out(width, 0.0);
    double wsum = 0.0;
    double phases[3], weights[3];
    for (int k = 0; k < 3; ++k) {
        phases[k] = phase(rng);
        weights[k] = weight(rng);
        wsum += weights[k];
    }
    for (int x = 0; x < width; ++x) {
        double v = 0.0;
        for (int k = 0; k < 3; ++k) {
            double freq = 2.0 * std::numbers::pi * (k + 1) / width;
            v += weights[k] * std::sin(freq * x + phases[k]);
        }
        out[x] = amp * v / wsum;
    }
    return out;
}

}  // namespace

std::vector<PatientRecord> generate_synthetic(const SynthConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    const double h = config.height;
    const double min_t = config.min_band_thickness_px;
    // Anchor rows leave top/bottom margins and room for the undulation.
    const double top = 0.12 * h;
    const double bottom = 0.88 * h;
    const double span = bottom - top;

    static const Region kPattern[5] = {Region::fovea, Region::parafovea, Region::parafovea,
                                       Region::perifovea, Region::perifovea};

    std::vector<PatientRecord> dataset;
    for (int p = 0; p < config.num_patients; ++p) {
        PatientRecord patient;
        patient.patient_id = format_string("p%02d", p);
        for (int i = 0; i < 5; ++i) {
            ScanRecord rec;
            BScan& scan = rec.scan;
            scan.patient_id = patient.patient_id;
            scan.image_id = format_string("%s_s%d_%s", patient.patient_id.c_str(), i,
                                          to_string(kPattern[i]));
            scan.region = kPattern[i];
            scan.pixels = ImageF(config.height, config.width);

            // Five smooth curves around evenly spaced anchors; a downward then
            // upward min-gap sweep restores ordering and the image bounds
            // without breaking the minimum band thickness (feasible because
            // validate() guarantees 5 * min_t <= height).
            double amp = std::min(config.smoothness_scale_px,
                                  std::max(0.0, (span / kNumSurfaces - min_t) / 2.0));
            std::array<std::vector<double>, kNumSurfaces> pos;
            for (int s = 0; s < kNumSurfaces; ++s) {
                double anchor = top + span * (s + 0.5) / kNumSurfaces;
                pos[s] = smooth_curve(config.width, amp, rng);
                for (double& v : pos[s]) v += anchor;
            }
            for (int c = 0; c < config.width; ++c) {
                for (int s = 1; s < kNumSurfaces; ++s)
                    pos[s][c] = std::max(pos[s][c], pos[s - 1][c] + min_t);
                pos[kNumSurfaces - 1][c] = std::min(pos[kNumSurfaces - 1][c], h - 1.0);
                for (int s = kNumSurfaces - 2; s >= 0; --s)
                    pos[s][c] = std::min(pos[s][c], pos[s + 1][c] - min_t);
            }
            SurfaceSet truth(config.width);
            for (int s = 0; s < kNumSurfaces; ++s) truth.set_surface(s, std::move(pos[s]));

            LabelGrid labels = rasterize_surfaces(truth, config.height, config.width);
            for (int r = 0; r < config.height; ++r)
                for (int c = 0; c < config.width; ++c) {
                    double v = config.layer_means[labels(r, c)] + config.noise_std * noise(rng);
                    // quantize to the 16-bit grid so save/load round-trips exactly
                    v = std::clamp(v, 0.0, 1.0);
                    scan.pixels(r, c) = std::round(v * 65535.0) / 65535.0;
                }

            rec.ground_truth = truth;
            if (config.grader2_noise_std > 0.0) {
                SurfaceSet g2(config.width);
                for (int s = 0; s < kNumSurfaces; ++s) {
                    std::vector<double> curve =
                        smooth_curve(config.width, config.grader2_noise_std, rng);
                    for (int c = 0; c < config.width; ++c) {
                        double v = truth.position(s, c) + curve[c];
                        curve[c] = std::clamp(v, 0.0, h - 1.0);
                    }
                    g2.set_surface(s, curve);
                }
                rec.grader2 = std::move(g2);
            }
            patient.scans.push_back(std::move(rec));
        }
        dataset.push_back(std::move(patient));
    }
    return dataset;
}

}  // namespace octseg
