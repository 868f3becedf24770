#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "octseg/model.hpp"

namespace octseg {

// Grayscale B-scan as an SVG with one colored polyline per surface per named
// set (broken at invalid spans) plus a legend. Returns the SVG text and
// writes it to out_path.
std::string render_overlay(const BScan& scan,
                           const std::vector<std::pair<std::string, const SurfaceSet*>>& sets,
                           const std::filesystem::path& out_path);

// 8-bit grayscale PNG encoding (zlib-backed); used for the SVG background.
std::vector<std::uint8_t> encode_png_gray8(const ImageF& img);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

}  // namespace octseg
