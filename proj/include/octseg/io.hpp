#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "octseg/fcn.hpp"
#include "octseg/model.hpp"

namespace octseg {

// --------------------------------------------------------------------------
// Images: binary PGM (P5), 8- or 16-bit grayscale. Intensities normalize to
// [0,1] by the bit-depth maximum.

struct PgmImage {
    int width = 0;
    int height = 0;
    int maxval = 255;
    std::vector<std::uint16_t> pixels;  // row-major
};

PgmImage read_pgm(const std::filesystem::path& path);
ImageF normalize_pgm(const PgmImage& img);
// bits must be 8 or 16; values are clamped to [0,1] and quantized.
void write_pgm(const std::filesystem::path& path, const ImageF& img, int bits = 16);

// --------------------------------------------------------------------------
// Surfaces: CSV with header "surface_id,c0,c1,...", one row per surface,
// NaN marks an invalid column.

SurfaceSet read_surface_csv(const std::filesystem::path& path, int expected_width = -1);
void write_surface_csv(const std::filesystem::path& path, const SurfaceSet& surfaces);

// --------------------------------------------------------------------------
// Dataset manifest: flat text, one [image] block of key = value lines per
// scan. Keys: patient_id, image_id, region, image, ground_truth, optional
// grader2, optional estimate.<METHOD>, optional transversal_um / axial_um.
// Relative paths resolve against the manifest directory.

std::vector<PatientRecord> load_dataset(const std::filesystem::path& manifest_path,
                                        bool enforce_regions = true);
// Writes images (16-bit PGM), surface CSVs and a manifest under dir.
std::filesystem::path save_dataset(const std::vector<PatientRecord>& dataset,
                                   const std::filesystem::path& dir);

// Blocks of exactly-zero pixels at least min_size x min_size large, found by
// a box erosion/dilation pass; nonzero mask entries are excluded from the
// training loss. Returns an empty grid when nothing qualifies.
MaskGrid detect_zero_regions(const ImageF& image, int min_size = 32);

// --------------------------------------------------------------------------
// Parameter checkpoints: versioned binary container, named groups with shape
// headers and little-endian float64 payloads (see docs/FORMATS.md).

void save_checkpoint(const std::filesystem::path& path, const NetworkConfig& config,
                     const Parameters& params);
struct Checkpoint {
    NetworkConfig config;
    Parameters params;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

// --------------------------------------------------------------------------
// Flat key = value configuration files (dotted keys, # comments).

class KeyValueConfig {
public:
    KeyValueConfig() = default;
    static KeyValueConfig from_file(const std::filesystem::path& path);
    static KeyValueConfig from_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    std::string source_;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace octseg
