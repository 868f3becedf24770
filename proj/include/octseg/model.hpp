#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "octseg/tensor.hpp"

namespace octseg {

enum class Region { fovea, parafovea, perifovea };

const char* to_string(Region r);
Region region_from_string(const std::string& s);

// Dataset default geometry: 768 x 496 px, 11.11 / 3.867 um per px.
struct ScanGeometry {
    double transversal_um_per_px = 11.11;
    double axial_um_per_px = 3.867;
};

struct BScan {
    ImageF pixels;  // intensities in [0,1], rows = axial, cols = transversal
    ScanGeometry geometry;
    std::string patient_id;
    std::string image_id;
    Region region = Region::fovea;
    // Nonzero where a pixel sits in a detected all-zero block; such pixels are
    // excluded from the training loss. Empty when no zero regions exist.
    MaskGrid zero_region;

    int height() const { return pixels.rows(); }
    int width() const { return pixels.cols(); }
    void validate() const;
};

inline constexpr std::array<int, 5> kSurfaceIds{1, 2, 4, 6, 11};
inline constexpr int kNumSurfaces = 5;
inline constexpr int kNumClasses = 6;  // bands between/around the 5 surfaces

// Position of surface id by index: surface_index(4) == 2.
int surface_index(int surface_id);

// Per-surface, per-column axial positions (fractional pixels) with validity.
class SurfaceSet {
public:
    SurfaceSet() = default;
    explicit SurfaceSet(int width);  // everything invalid

    int width() const { return width_; }
    double position(int s, int c) const { return positions_[s][c]; }
    bool is_valid(int s, int c) const { return valid_[s][c] != 0; }
    void set(int s, int c, double row);
    void invalidate(int s, int c);
    void invalidate_surface(int s);

    const std::vector<double>& positions(int s) const { return positions_[s]; }
    const std::vector<std::uint8_t>& validity(int s) const { return valid_[s]; }
    void set_surface(int s, std::vector<double> rows);  // marks all columns valid

    bool fully_valid() const;
    bool surface_fully_valid(int s) const;
    bool surface_any_valid(int s) const;

    bool operator==(const SurfaceSet& o) const = default;

private:
    int width_ = 0;
    std::array<std::vector<double>, kNumSurfaces> positions_;
    std::array<std::vector<std::uint8_t>, kNumSurfaces> valid_;
};

struct OrderingViolation {
    int surface_id;  // id of the lower surface of the offending pair
    int column;
    bool operator==(const OrderingViolation&) const = default;
};

struct OrderingReport {
    bool ordered = true;
    std::vector<OrderingViolation> violations;
};

// Checks pos(1) <= pos(2) <= pos(4) <= pos(6) <= pos(11) per column between
// consecutive valid surfaces; vacuously ordered where nothing is comparable.
OrderingReport validate_surface_ordering(const SurfaceSet& surfaces);

// Pixel (r,c) gets class k = #{s : pos(s,c) <= r}. Requires an ordered, fully
// valid set; throws ValidationError otherwise.
LabelGrid rasterize_surfaces(const SurfaceSet& surfaces, int height, int width);

struct ValidityMask {
    int width = 0;
    std::array<std::vector<std::uint8_t>, kNumSurfaces> valid;

    bool get(int s, int c) const { return valid[s][c] != 0; }
    bool operator==(const ValidityMask&) const = default;
};

ValidityMask validity_of(const SurfaceSet& s);

// AND of all inputs' validity; rejects mismatched widths or an empty list.
ValidityMask intersect_validity(const std::vector<const SurfaceSet*>& sets);

// One-hot class probabilities from a label map (e.g. for pipeline oracles).
FeatureMap one_hot(const LabelGrid& labels, int num_classes = kNumClasses);

// True when every per-pixel class vector is nonnegative and sums to 1
// within tol.
bool is_probability_map(const FeatureMap& probs, double tol = 1e-6);

struct ScanRecord {
    BScan scan;
    SurfaceSet ground_truth;                  // grader 1
    std::optional<SurfaceSet> grader2;        // inter-observer baseline
    std::map<std::string, SurfaceSet> external;  // method name -> estimate
};

struct PatientRecord {
    std::string patient_id;
    std::vector<ScanRecord> scans;

    // 5 scans: 1 fovea, 2 parafovea, 2 perifovea.
    void validate(bool enforce_regions = true) const;
};

}  // namespace octseg
