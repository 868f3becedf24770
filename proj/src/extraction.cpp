#include "octseg/extraction.hpp"

#include <algorithm>
#include <cmath>

#include "octseg/fcn.hpp"

namespace octseg {

CandidateSet extract_candidates(const LabelGrid& labels) {
    CandidateSet out;
    out.height = labels.rows();
    out.width = labels.cols();
    for (int s = 0; s < kNumSurfaces; ++s)
        out.rows[s].assign(out.width, {});

    for (int c = 0; c < out.width; ++c) {
        int prev = 0;  // label(-1,c) := 0
        for (int r = 0; r < out.height; ++r) {
            int cur = labels(r, c);
            // Surface s crosses at r when prev < s+1 <= cur.
            for (int k = prev + 1; k <= cur; ++k)
                out.rows[k - 1][c].push_back(static_cast<double>(r));
            prev = cur;
        }
    }
    return out;
}

namespace {

// Pick from `cands` the row nearest to anchor (ties -> smaller row). With no
// anchor, the topmost candidate wins.
double pick_candidate(const std::vector<double>& cands, const double* anchor) {
    if (!anchor) return cands.front();
    double best = cands.front();
    double best_d = std::abs(cands.front() - *anchor);
    for (std::size_t i = 1; i < cands.size(); ++i) {
        double d = std::abs(cands[i] - *anchor);
        if (d < best_d) {
            best = cands[i];
            best_d = d;
        }
    }
    return best;
}

}  // namespace

SegResult adjudicate(const CandidateSet& candidates) {
    const int width = candidates.width;
    SegResult result;
    result.surfaces = SurfaceSet(width);

    // Resolution order: 2,4,6,11 then 1; anchor is the previously resolved
    // surface (surface 1 anchors on 2).
    struct Step { int s; int anchor; };
    static constexpr Step kOrder[] = {{1, -1}, {2, 1}, {3, 2}, {4, 3}, {0, 1}};

    for (const Step& step : kOrder) {
        const auto& cols = candidates.rows[step.s];
        std::vector<int> resolved_cols;  // columns resolved from own candidates
        for (int c = 0; c < width; ++c) {
            if (cols[c].empty()) continue;
            double anchor_val = 0.0;
            const double* anchor = nullptr;
            if (cols[c].size() > 1 && step.anchor >= 0 &&
                result.surfaces.is_valid(step.anchor, c)) {
                anchor_val = result.surfaces.position(step.anchor, c);
                anchor = &anchor_val;
            }
            result.surfaces.set(step.s, c, pick_candidate(cols[c], anchor));
            resolved_cols.push_back(c);
        }
        if (resolved_cols.empty()) {
            result.unresolved.push_back(kSurfaceIds[step.s]);
            result.surfaces.invalidate_surface(step.s);
            continue;
        }
        // Impute gaps from the nearest candidate-resolved column (ties ->
        // smaller column index).
        std::size_t next = 0;
        for (int c = 0; c < width; ++c) {
            if (result.surfaces.is_valid(step.s, c)) continue;
            while (next + 1 < resolved_cols.size() && resolved_cols[next] < c) ++next;
            int hi = resolved_cols[next];
            int source = hi;
            if (next > 0 && hi > c) {
                int lo = resolved_cols[next - 1];
                if (c - lo <= hi - c) source = lo;
            } else if (hi < c) {
                source = hi;  // past the last resolved column
            }
            result.surfaces.set(step.s, c, result.surfaces.position(step.s, source));
        }
    }
    std::sort(result.unresolved.begin(), result.unresolved.end());
    return result;
}

SegResult seg_pipeline(const FeatureMap& probs) {
    return adjudicate(extract_candidates(predict_labels(probs)));
}

}  // namespace octseg
