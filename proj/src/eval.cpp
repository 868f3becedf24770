#include "octseg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "octseg/extraction.hpp"

namespace octseg {

ErrorVector signed_error(const std::vector<double>& ref, const std::vector<double>& est,
                         const std::vector<std::uint8_t>& mask) {
    if (ref.size() != est.size() || ref.size() != mask.size())
        throw ValidationError("signed_error: width mismatch");
    ErrorVector e;
    for (std::size_t c = 0; c < ref.size(); ++c)
        if (mask[c]) e.values.push_back(ref[c] - est[c]);
    return e;
}

ErrorStats unsigned_stats(const ErrorVector& e) {
    if (e.values.empty()) throw ValidationError("unsigned_stats: empty error vector");
    ErrorStats s;
    s.n = e.values.size();
    double sum = 0.0, asum = 0.0, amax = 0.0;
    for (double v : e.values) {
        sum += v;
        double a = std::abs(v);
        asum += a;
        amax = std::max(amax, a);
    }
    s.mean_signed = sum / static_cast<double>(s.n);
    s.mean_unsigned = asum / static_cast<double>(s.n);
    s.max_unsigned = amax;
    double var = 0.0;
    for (double v : e.values) {
        double d = std::abs(v) - s.mean_unsigned;
        var += d * d;
    }
    s.std_unsigned = std::sqrt(var / static_cast<double>(s.n));
    return s;
}

std::vector<FoldSpec> make_folds(std::vector<std::string> patient_ids, int k) {
    std::sort(patient_ids.begin(), patient_ids.end());
    if (std::adjacent_find(patient_ids.begin(), patient_ids.end()) != patient_ids.end())
        throw ValidationError("make_folds: duplicate patient id");
    if (k != static_cast<int>(patient_ids.size()))
        throw ValidationError(format_string(
            "make_folds: K=%d but %zu patients (leave-one-patient-out requires K = patients)",
            k, patient_ids.size()));
    std::vector<FoldSpec> folds;
    for (int i = 0; i < k; ++i) {
        FoldSpec f;
        f.fold_id = i;
        f.test_patient = patient_ids[i];
        for (int j = 0; j < k; ++j)
            if (j != i) f.train_patients.push_back(patient_ids[j]);
        folds.push_back(std::move(f));
    }
    return folds;
}

namespace {

constexpr Region kRegions[] = {Region::fovea, Region::parafovea, Region::perifovea};

ErrorStats combine_per_image(const std::vector<ErrorStats>& per_image) {
    // Flag mode: each image is one observation; std summarizes the per-image
    // unsigned means.
    ErrorStats s;
    s.n = per_image.size();
    for (const auto& e : per_image) {
        s.mean_signed += e.mean_signed;
        s.mean_unsigned += e.mean_unsigned;
        s.max_unsigned = std::max(s.max_unsigned, e.max_unsigned);
    }
    s.mean_signed /= static_cast<double>(s.n);
    s.mean_unsigned /= static_cast<double>(s.n);
    double var = 0.0;
    for (const auto& e : per_image) {
        double d = e.mean_unsigned - s.mean_unsigned;
        var += d * d;
    }
    s.std_unsigned = std::sqrt(var / static_cast<double>(s.n));
    return s;
}

}  // namespace

ReportTable evaluate_methods(const std::vector<EvalScan>& scans,
                             const std::vector<MethodEstimates>& methods,
                             const EvalOptions& options) {
    if (scans.empty()) throw ValidationError("evaluate_methods: no scans");
    if (methods.empty()) throw ValidationError("evaluate_methods: no methods");
    for (const auto& m : methods)
        if (m.estimates.size() != scans.size())
            throw ValidationError("evaluate_methods: method " + m.name +
                                  " estimate count mismatch");

    const std::size_t M = methods.size();
    ReportTable table;
    table.axial_um_per_px = scans.front().axial_um_per_px;
    for (const auto& m : methods) table.methods.push_back(m.name);

    // Shared mask per scan: ground truth AND every method's validity.
    std::vector<ValidityMask> masks;
    masks.reserve(scans.size());
    for (std::size_t i = 0; i < scans.size(); ++i) {
        if (!scans[i].ground_truth)
            throw ValidationError("evaluate_methods: missing ground truth");
        std::vector<const SurfaceSet*> inputs{scans[i].ground_truth};
        for (const auto& m : methods) inputs.push_back(&m.estimates[i]);
        masks.push_back(intersect_validity(inputs));
    }

    // diffs[m][s][i]: signed errors of method m, surface s, scan i.
    std::vector<std::vector<std::vector<ErrorVector>>> diffs(
        M, std::vector<std::vector<ErrorVector>>(kNumSurfaces,
                                                 std::vector<ErrorVector>(scans.size())));
    for (std::size_t i = 0; i < scans.size(); ++i)
        for (std::size_t m = 0; m < M; ++m)
            for (int s = 0; s < kNumSurfaces; ++s)
                diffs[m][s][i] = signed_error(scans[i].ground_truth->positions(s),
                                              methods[m].estimates[i].positions(s),
                                              masks[i].valid[s]);

    auto cell_stats = [&](std::size_t m, int s,
                          const std::vector<std::size_t>& scan_ids)
        -> std::optional<ErrorStats> {
        if (options.per_image_average) {
            std::vector<ErrorStats> per_image;
            for (std::size_t i : scan_ids)
                if (!diffs[m][s][i].values.empty())
                    per_image.push_back(unsigned_stats(diffs[m][s][i]));
            if (per_image.empty()) return std::nullopt;
            return combine_per_image(per_image);
        }
        ErrorVector pooled;
        for (std::size_t i : scan_ids)
            pooled.values.insert(pooled.values.end(), diffs[m][s][i].values.begin(),
                                 diffs[m][s][i].values.end());
        if (pooled.values.empty()) return std::nullopt;
        return unsigned_stats(pooled);
    };

    std::vector<std::size_t> all_ids(scans.size());
    std::iota(all_ids.begin(), all_ids.end(), 0);

    for (int s = 0; s < kNumSurfaces; ++s) {
        ReportTable::Row row;
        row.surface_id = kSurfaceIds[s];
        for (std::size_t m = 0; m < M; ++m) {
            row.cells.push_back(cell_stats(m, s, all_ids));
            if (!row.cells.back())
                table.excluded.push_back(format_string("surface %d, %s: no valid columns",
                                                       kSurfaceIds[s],
                                                       methods[m].name.c_str()));
        }
        table.rows.push_back(std::move(row));
    }
    for (int s = 0; s < kNumSurfaces; ++s)
        for (Region rg : kRegions) {
            std::vector<std::size_t> ids;
            for (std::size_t i = 0; i < scans.size(); ++i)
                if (scans[i].region == rg) ids.push_back(i);
            ReportTable::Row row;
            row.surface_id = kSurfaceIds[s];
            row.region = rg;
            for (std::size_t m = 0; m < M; ++m) {
                row.cells.push_back(ids.empty() ? std::nullopt : cell_stats(m, s, ids));
                if (!row.cells.back())
                    table.excluded.push_back(
                        format_string("surface %d %s, %s: no valid columns", kSurfaceIds[s],
                                      to_string(rg), methods[m].name.c_str()));
            }
            table.rows.push_back(std::move(row));
        }

    // Summary rows mirror the published layout: mean/max/std of the
    // per-surface aggregate unsigned means (population std).
    table.summary.mean.assign(M, 0.0);
    table.summary.max.assign(M, 0.0);
    table.summary.std.assign(M, 0.0);
    for (std::size_t m = 0; m < M; ++m) {
        std::vector<double> vals;
        for (int s = 0; s < kNumSurfaces; ++s)
            if (table.rows[s].cells[m]) vals.push_back(table.rows[s].cells[m]->mean_unsigned);
        if (vals.empty()) continue;
        double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
        double mx = *std::max_element(vals.begin(), vals.end());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        table.summary.mean[m] = mean;
        table.summary.max[m] = mx;
        table.summary.std[m] = std::sqrt(var / vals.size());
    }
    return table;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string region_name(const std::optional<Region>& r) {
    return r ? to_string(*r) : std::string("all");
}

}  // namespace

std::string render_text(const ReportTable& table, bool regional) {
    std::ostringstream out;
    out << (regional ? "Mean unsigned error (px) per surface and region\n"
                     : "Mean unsigned error (px) per surface, aggregated across regions\n");
    out << format_string("%-22s", "");
    for (const auto& m : table.methods) out << format_string("%14s", m.c_str());
    out << '\n';
    for (const auto& row : table.rows) {
        if (regional == !row.region) continue;
        std::string label = format_string("surface %d", row.surface_id);
        if (row.region) label += std::string(" ") + to_string(*row.region);
        out << format_string("%-22s", label.c_str());
        for (const auto& cell : row.cells) {
            if (cell)
                out << format_string("%14.3f", cell->mean_unsigned);
            else
                out << format_string("%14s", "-");
        }
        out << '\n';
    }
    if (!regional) {
        const char* names[3] = {"mean", "max", "std"};
        const std::vector<double>* vals[3] = {&table.summary.mean, &table.summary.max,
                                              &table.summary.std};
        for (int i = 0; i < 3; ++i) {
            out << format_string("%-22s", names[i]);
            for (double v : *vals[i]) out << format_string("%14.3f", v);
            out << '\n';
        }
    }
    out << "(std rows use the population standard deviation; errors in pixels, "
        << format_string("axial resolution %.4g um/px)", table.axial_um_per_px)
        << '\n';
    return out.str();
}

std::string render_csv(const ReportTable& table) {
    std::ostringstream out;
    out << format_string("# octseg report, axial_um_per_px=%.17g\n", table.axial_um_per_px);
    out << "row,surface,region,method,n,mean_signed_px,mean_unsigned_px,std_unsigned_px,"
           "max_unsigned_px,mean_unsigned_um\n";
    for (const auto& row : table.rows) {
        for (std::size_t m = 0; m < table.methods.size(); ++m) {
            const auto& cell = row.cells[m];
            if (!cell) {
                out << format_string("cell,%d,%s,%s,0,,,,,\n", row.surface_id,
                                     region_name(row.region).c_str(), table.methods[m].c_str());
                continue;
            }
            out << format_string(
                "cell,%d,%s,%s,%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", row.surface_id,
                region_name(row.region).c_str(), table.methods[m].c_str(), cell->n,
                cell->mean_signed, cell->mean_unsigned, cell->std_unsigned, cell->max_unsigned,
                cell->mean_unsigned * table.axial_um_per_px);
        }
    }
    const char* names[3] = {"mean", "max", "std"};
    const std::vector<double>* vals[3] = {&table.summary.mean, &table.summary.max,
                                          &table.summary.std};
    for (int i = 0; i < 3; ++i)
        for (std::size_t m = 0; m < table.methods.size(); ++m)
            out << format_string("summary,%s,all,%s,,,%.17g,,,\n", names[i],
                                 table.methods[m].c_str(), (*vals[i])[m]);
    return out.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

ReportTable parse_report_csv(const std::string& csv) {
    ReportTable table;
    std::istringstream in(csv);
    std::string line;
    std::map<std::string, std::size_t> method_index;
    auto method_id = [&](const std::string& name) {
        auto it = method_index.find(name);
        if (it != method_index.end()) return it->second;
        method_index[name] = table.methods.size();
        table.methods.push_back(name);
        return table.methods.size() - 1;
    };
    std::map<std::pair<int, std::string>, std::size_t> row_index;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto pos = line.find("axial_um_per_px=");
            if (pos != std::string::npos)
                table.axial_um_per_px = std::strtod(line.c_str() + pos + 16, nullptr);
            continue;
        }
        if (line.rfind("row,", 0) == 0) continue;  // header
        auto f = split_csv_line(line);
        if (f.size() < 10)
            throw ValidationError(format_string("report csv line %d: expected 10 fields", lineno));
        if (f[0] == "summary") {
            std::size_t m = method_id(f[3]);
            auto& vec = f[1] == "mean" ? table.summary.mean
                        : f[1] == "max" ? table.summary.max
                                        : table.summary.std;
            if (vec.size() <= m) vec.resize(m + 1, 0.0);
            vec[m] = std::strtod(f[6].c_str(), nullptr);
            continue;
        }
        int surface = std::atoi(f[1].c_str());
        std::size_t m = method_id(f[3]);
        auto key = std::make_pair(surface, f[2]);
        if (!row_index.count(key)) {
            row_index[key] = table.rows.size();
            ReportTable::Row row;
            row.surface_id = surface;
            if (f[2] != "all") row.region = region_from_string(f[2]);
            table.rows.push_back(std::move(row));
        }
        auto& row = table.rows[row_index[key]];
        if (row.cells.size() <= m) row.cells.resize(m + 1);
        if (!f[4].empty() && f[4] != "0") {
            ErrorStats s;
            s.n = static_cast<std::size_t>(std::strtoull(f[4].c_str(), nullptr, 10));
            s.mean_signed = std::strtod(f[5].c_str(), nullptr);
            s.mean_unsigned = std::strtod(f[6].c_str(), nullptr);
            s.std_unsigned = std::strtod(f[7].c_str(), nullptr);
            s.max_unsigned = std::strtod(f[8].c_str(), nullptr);
            row.cells[m] = s;
        }
    }
    for (auto& row : table.rows) row.cells.resize(table.methods.size());
    return table;
}

// ---------------------------------------------------------------------------
// Cross validation

Pipeline pipeline_from_string(const std::string& s) {
    if (s == "seg") return Pipeline::seg;
    if (s == "seg+reg") return Pipeline::seg_reg;
    if (s == "both") return Pipeline::both;
    throw ValidationError("unknown pipeline '" + s + "' (expected seg|seg+reg|both)");
}

const char* to_string(Pipeline p) {
    switch (p) {
        case Pipeline::seg: return "seg";
        case Pipeline::seg_reg: return "seg+reg";
        case Pipeline::both: return "both";
    }
    return "?";
}

XvalResult run_cross_validation(const std::vector<PatientRecord>& dataset,
                                const XvalConfig& config) {
    if (dataset.empty()) throw ValidationError("run_cross_validation: empty dataset");
    for (const auto& p : dataset) p.validate();

    std::vector<std::string> ids;
    for (const auto& p : dataset) ids.push_back(p.patient_id);
    int k = config.k > 0 ? config.k : static_cast<int>(ids.size());
    std::vector<FoldSpec> folds = make_folds(ids, k);

    std::map<std::string, const PatientRecord*> by_id;
    for (const auto& p : dataset) by_id[p.patient_id] = &p;

    const bool want_seg = config.pipeline != Pipeline::seg_reg;
    const bool want_reg = config.pipeline != Pipeline::seg;

    XvalResult result;
    result.folds.resize(folds.size());

    parallel_for(folds.size(), config.threads, [&](std::size_t fi) {
        const FoldSpec& fold = folds[fi];
        FoldArtifacts art;
        art.fold = fold;
        try {
            // Assemble training data from the other patients.
            std::vector<LabelGrid> labels;
            std::vector<TrainSample> samples;
            std::vector<const ScanRecord*> train_scans;
            for (const auto& pid : fold.train_patients)
                for (const auto& rec : by_id.at(pid)->scans) train_scans.push_back(&rec);
            labels.reserve(train_scans.size());
            for (const ScanRecord* rec : train_scans)
                labels.push_back(rasterize_surfaces(rec->ground_truth, rec->scan.height(),
                                                    rec->scan.width()));
            for (std::size_t i = 0; i < train_scans.size(); ++i) {
                const BScan& scan = train_scans[i]->scan;
                samples.push_back({&scan.pixels, &labels[i],
                                   scan.zero_region.empty() ? nullptr : &scan.zero_region});
            }

            NetworkConfig ncfg = config.net;
            ncfg.seed = config.net.seed + static_cast<std::uint64_t>(fold.fold_id);
            TrainingConfig tcfg = config.train;
            tcfg.seed = config.train.seed + static_cast<std::uint64_t>(fold.fold_id);

            TrainResult trained = train(samples, tcfg, ncfg);
            art.params = std::move(trained.params);
            art.loss_history = std::move(trained.loss_history);

            DenseFcn net(ncfg);
            const PatientRecord& test = *by_id.at(fold.test_patient);
            for (const auto& rec : test.scans) {
                art.image_ids.push_back(rec.scan.image_id);
                FeatureMap probs = net.forward(rec.scan.pixels, art.params);
                if (want_seg) {
                    SegResult r = seg_pipeline(probs);
                    if (!r.unresolved.empty())
                        log_warn("fold %d %s: SEG left %zu surfaces unresolved", fold.fold_id,
                                 rec.scan.image_id.c_str(), r.unresolved.size());
                    art.estimates["SEG"].push_back(std::move(r.surfaces));
                }
                if (want_reg) {
                    SegResult r = seg_reg_pipeline(probs, config.gp);
                    if (!r.unresolved.empty())
                        log_warn("fold %d %s: SEG+REG left %zu surfaces unresolved",
                                 fold.fold_id, rec.scan.image_id.c_str(), r.unresolved.size());
                    art.estimates["SEG+REG"].push_back(std::move(r.surfaces));
                }
            }
        } catch (const std::exception& e) {
            throw NumericalError(format_string("fold %d (test patient %s): %s", fold.fold_id,
                                               fold.test_patient.c_str(), e.what()));
        }
        result.folds[fi] = std::move(art);
        log_info("fold %d/%zu done (test patient %s)", fold.fold_id + 1, folds.size(),
                 fold.test_patient.c_str());
    });

    // Pool every scan (each tested exactly once) into one evaluation.
    std::vector<EvalScan> scans;
    std::vector<MethodEstimates> methods;
    if (want_seg) methods.push_back({"SEG", {}});
    if (want_reg) methods.push_back({"SEG+REG", {}});

    // External methods and grader 2 join only when present on every scan.
    std::set<std::string> externals;
    bool grader2_everywhere = true;
    bool first = true;
    for (const auto& p : dataset)
        for (const auto& rec : p.scans) {
            std::set<std::string> here;
            for (const auto& [name, est] : rec.external) here.insert(name);
            if (first) {
                externals = here;
                first = false;
            } else {
                std::set<std::string> kept;
                std::set_intersection(externals.begin(), externals.end(), here.begin(),
                                      here.end(), std::inserter(kept, kept.begin()));
                if (kept.size() != externals.size())
                    log_warn("dropping external methods missing on %s", rec.scan.image_id.c_str());
                externals = std::move(kept);
            }
            if (!rec.grader2) grader2_everywhere = false;
        }
    for (const auto& name : externals) methods.push_back({name, {}});
    if (grader2_everywhere) methods.push_back({"Inter-Observer", {}});

    for (const auto& fold_art : result.folds) {
        const PatientRecord& patient = *by_id.at(fold_art.fold.test_patient);
        for (std::size_t i = 0; i < patient.scans.size(); ++i) {
            const ScanRecord& rec = patient.scans[i];
            EvalScan es;
            es.region = rec.scan.region;
            es.axial_um_per_px = rec.scan.geometry.axial_um_per_px;
            es.ground_truth = &rec.ground_truth;
            scans.push_back(es);
            for (auto& m : methods) {
                if (m.name == "Inter-Observer")
                    m.estimates.push_back(*rec.grader2);
                else if (m.name == "SEG" || m.name == "SEG+REG")
                    m.estimates.push_back(fold_art.estimates.at(m.name)[i]);
                else
                    m.estimates.push_back(rec.external.at(m.name));
            }
        }
    }

    result.table = evaluate_methods(scans, methods, config.eval);
    return result;
}

}  // namespace octseg
