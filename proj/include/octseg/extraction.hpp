#pragma once

#include <vector>

#include "octseg/model.hpp"

namespace octseg {

// Boundary crossing rows per surface per column, sorted ascending.
struct CandidateSet {
    int height = 0;
    int width = 0;
    // rows[s][c] = candidate axial rows for surface index s at column c
    std::array<std::vector<std::vector<double>>, kNumSurfaces> rows;
};

// Surface index s has a candidate at row r iff label(r-1,c) < s+1 <= label(r,c)
// scanning down the column, with label(-1,c) taken as 0.
CandidateSet extract_candidates(const LabelGrid& labels);

struct SegResult {
    SurfaceSet surfaces;
    // Surface ids with zero candidates in every column; those surfaces are
    // invalid image-wide in `surfaces`.
    std::vector<int> unresolved;
};

// Duplicate adjudication and nearest-column imputation, surfaces resolved in
// order 2,4,6,11 then 1. Duplicates pick the candidate nearest the resolved
// prior surface in that column (surface 1 anchors on surface 2; surface 2,
// first in the order, has no anchor and takes the topmost candidate).
// Equidistant duplicates pick the smaller row; equidistant imputation sources
// pick the smaller column.
SegResult adjudicate(const CandidateSet& candidates);

// SEG: adjudicate(extract_candidates(predict_labels(probs))).
SegResult seg_pipeline(const FeatureMap& probs);

}  // namespace octseg
