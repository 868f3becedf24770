#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "octseg/model.hpp"

namespace octseg {

// Desk-scale synthetic B-scans: five smooth ordered surfaces, constant band
// intensities plus Gaussian noise. Ground truth is the sampled surfaces.
struct SynthConfig {
    int num_patients = 3;
    int width = 128;
    int height = 128;
    double smoothness_scale_px = 6.0;     // undulation amplitude
    double min_band_thickness_px = 6.0;
    // Pairwise-separated band intensities (0.19 minimum gap) so the toy FCN
    // can classify from local contrast at moderate noise.
    std::array<double, kNumClasses> layer_means = {0.05, 0.43, 0.81, 0.24, 0.62, 1.00};
    double noise_std = 0.05;
    // Smooth low-amplitude perturbation of the truth, emitted as the second
    // grader; 0 disables the grader-2 column.
    double grader2_noise_std = 0.5;
    std::uint64_t seed = 2024;

    void validate() const;
};

std::vector<PatientRecord> generate_synthetic(const SynthConfig& config);

}  // namespace octseg
