#include "octseg/model.hpp"

#include <algorithm>
#include <cmath>

namespace octseg {

const char* to_string(Region r) {
    switch (r) {
        case Region::fovea: return "fovea";
        case Region::parafovea: return "parafovea";
        case Region::perifovea: return "perifovea";
    }
    return "?";
}

Region region_from_string(const std::string& s) {
    if (s == "fovea") return Region::fovea;
    if (s == "parafovea") return Region::parafovea;
    if (s == "perifovea") return Region::perifovea;
    throw ValidationError("unknown region '" + s + "' (expected fovea|parafovea|perifovea)");
}

void BScan::validate() const {
    if (height() < 2 || width() < 2)
        throw ValidationError(format_string("BScan %s: shape %dx%d too small",
                                            image_id.c_str(), height(), width()));
    for (double v : pixels.data()) {
        if (!(v >= 0.0 && v <= 1.0))
            throw ValidationError(format_string(
                "BScan %s: intensity %g outside [0,1]", image_id.c_str(), v));
    }
    if (!zero_region.empty() && !zero_region.same_shape(pixels))
        throw ValidationError("BScan " + image_id + ": zero_region shape mismatch");
}

int surface_index(int surface_id) {
    for (int i = 0; i < kNumSurfaces; ++i)
        if (kSurfaceIds[i] == surface_id) return i;
    throw ValidationError(format_string("unknown surface id %d", surface_id));
}

SurfaceSet::SurfaceSet(int width) : width_(width) {
    if (width < 0) throw ValidationError("SurfaceSet: negative width");
    for (int s = 0; s < kNumSurfaces; ++s) {
        positions_[s].assign(width, 0.0);
        valid_[s].assign(width, 0);
    }
}

void SurfaceSet::set(int s, int c, double row) {
    positions_[s][c] = row;
    valid_[s][c] = 1;
}

void SurfaceSet::invalidate(int s, int c) {
    positions_[s][c] = 0.0;
    valid_[s][c] = 0;
}

void SurfaceSet::invalidate_surface(int s) {
    std::fill(positions_[s].begin(), positions_[s].end(), 0.0);
    std::fill(valid_[s].begin(), valid_[s].end(), std::uint8_t{0});
}

void SurfaceSet::set_surface(int s, std::vector<double> rows) {
    if (static_cast<int>(rows.size()) != width_)
        throw ValidationError("SurfaceSet::set_surface: width mismatch");
    positions_[s] = std::move(rows);
    valid_[s].assign(width_, 1);
}

bool SurfaceSet::fully_valid() const {
    for (int s = 0; s < kNumSurfaces; ++s)
        if (!surface_fully_valid(s)) return false;
    return true;
}

bool SurfaceSet::surface_fully_valid(int s) const {
    return std::all_of(valid_[s].begin(), valid_[s].end(),
                       [](std::uint8_t v) { return v != 0; });
}

bool SurfaceSet::surface_any_valid(int s) const {
    return std::any_of(valid_[s].begin(), valid_[s].end(),
                       [](std::uint8_t v) { return v != 0; });
}

OrderingReport validate_surface_ordering(const SurfaceSet& surfaces) {
    OrderingReport report;
    for (int c = 0; c < surfaces.width(); ++c) {
        int prev = -1;
        for (int s = 0; s < kNumSurfaces; ++s) {
            if (!surfaces.is_valid(s, c)) continue;
            if (prev >= 0 && surfaces.position(prev, c) > surfaces.position(s, c)) {
                report.ordered = false;
                report.violations.push_back({kSurfaceIds[s], c});
            }
            prev = s;
        }
    }
    return report;
}

LabelGrid rasterize_surfaces(const SurfaceSet& surfaces, int height, int width) {
    if (width != surfaces.width())
        throw ValidationError("rasterize_surfaces: width mismatch");
    if (height < 1) throw ValidationError("rasterize_surfaces: empty height");
    if (!surfaces.fully_valid())
        throw ValidationError("rasterize_surfaces: surfaces must be fully valid");
    if (!validate_surface_ordering(surfaces).ordered)
        throw ValidationError("rasterize_surfaces: surfaces must be ordered");

    LabelGrid labels(height, width);
    for (int c = 0; c < width; ++c) {
        // Band boundaries are monotone, so walk them once per column.
        int s = 0;
        for (int r = 0; r < height; ++r) {
            while (s < kNumSurfaces && surfaces.position(s, c) <= static_cast<double>(r)) ++s;
            labels(r, c) = static_cast<std::uint8_t>(s);
        }
    }
    return labels;
}

ValidityMask validity_of(const SurfaceSet& s) {
    ValidityMask m;
    m.width = s.width();
    for (int i = 0; i < kNumSurfaces; ++i) m.valid[i] = s.validity(i);
    return m;
}

ValidityMask intersect_validity(const std::vector<const SurfaceSet*>& sets) {
    if (sets.empty()) throw ValidationError("intersect_validity: no inputs");
    ValidityMask mask = validity_of(*sets.front());
    for (std::size_t i = 1; i < sets.size(); ++i) {
        const SurfaceSet& s = *sets[i];
        if (s.width() != mask.width)
            throw ValidationError("intersect_validity: width mismatch");
        for (int k = 0; k < kNumSurfaces; ++k)
            for (int c = 0; c < mask.width; ++c)
                mask.valid[k][c] = mask.valid[k][c] && s.is_valid(k, c);
    }
    return mask;
}

FeatureMap one_hot(const LabelGrid& labels, int num_classes) {
    FeatureMap probs(num_classes, labels.rows(), labels.cols(), 0.0);
    for (int r = 0; r < labels.rows(); ++r)
        for (int c = 0; c < labels.cols(); ++c) {
            int k = labels(r, c);
            if (k < 0 || k >= num_classes)
                throw ValidationError(format_string("one_hot: label %d out of range", k));
            probs.at(k, r, c) = 1.0;
        }
    return probs;
}

bool is_probability_map(const FeatureMap& probs, double tol) {
    for (int y = 0; y < probs.height(); ++y)
        for (int x = 0; x < probs.width(); ++x) {
            double sum = 0.0;
            for (int c = 0; c < probs.channels(); ++c) {
                double p = probs.at(c, y, x);
                if (p < 0.0 || std::isnan(p)) return false;
                sum += p;
            }
            if (std::abs(sum - 1.0) > tol) return false;
        }
    return true;
}

void PatientRecord::validate(bool enforce_regions) const {
    if (enforce_regions) {
        if (scans.size() != 5)
            throw ValidationError(format_string("patient %s: expected 5 scans, got %zu",
                                                patient_id.c_str(), scans.size()));
        int fovea = 0, para = 0, peri = 0;
        for (const auto& rec : scans) {
            switch (rec.scan.region) {
                case Region::fovea: ++fovea; break;
                case Region::parafovea: ++para; break;
                case Region::perifovea: ++peri; break;
            }
        }
        if (fovea != 1 || para != 2 || peri != 2)
            throw ValidationError(format_string(
                "patient %s: region distribution %d/%d/%d, expected 1 fovea / 2 parafovea / "
                "2 perifovea",
                patient_id.c_str(), fovea, para, peri));
    }
    for (const auto& rec : scans) {
        rec.scan.validate();
        if (rec.ground_truth.width() != rec.scan.width())
            throw ValidationError("patient " + patient_id + ": ground truth width mismatch on " +
                                  rec.scan.image_id);
    }
}

}  // namespace octseg
