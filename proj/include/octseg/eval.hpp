#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "octseg/fcn.hpp"
#include "octseg/gp.hpp"
#include "octseg/model.hpp"

namespace octseg {

// Signed per-column differences e_s = ref - est, kept only where the mask is
// true (order preserved).
struct ErrorVector {
    std::vector<double> values;
};

ErrorVector signed_error(const std::vector<double>& ref, const std::vector<double>& est,
                         const std::vector<std::uint8_t>& mask);

struct ErrorStats {
    double mean_signed = 0.0;
    double mean_unsigned = 0.0;
    double std_unsigned = 0.0;  // population std of |e|
    double max_unsigned = 0.0;
    std::size_t n = 0;
};

ErrorStats unsigned_stats(const ErrorVector& e);  // throws on empty input

struct FoldSpec {
    int fold_id = 0;
    std::string test_patient;
    std::vector<std::string> train_patients;
};

// Leave-one-patient-out folds; K must equal the patient count. Deterministic:
// patients sorted by id, fold i tests patient i.
std::vector<FoldSpec> make_folds(std::vector<std::string> patient_ids, int k);

// One method's estimates for every scan, aligned with the scan list.
struct MethodEstimates {
    std::string name;
    std::vector<SurfaceSet> estimates;  // one per scan
};

struct EvalScan {
    Region region = Region::fovea;
    double axial_um_per_px = 3.867;
    const SurfaceSet* ground_truth = nullptr;
};

struct EvalOptions {
    // Default pools per-pixel errors across all images of a cell; the flag
    // averages per image first (sensitivity analysis).
    bool per_image_average = false;
};

struct ReportTable {
    std::vector<std::string> methods;  // column order
    struct Row {
        int surface_id = 0;
        std::optional<Region> region;  // nullopt = aggregate over regions
        std::vector<std::optional<ErrorStats>> cells;  // per method
    };
    std::vector<Row> rows;  // 5 aggregate rows then 15 regional rows
    // Summary over the aggregate rows' mean unsigned errors, per method.
    struct Summary {
        std::vector<double> mean, max, std;
    };
    Summary summary;
    double axial_um_per_px = 3.867;
    std::vector<std::string> excluded;  // diagnostics for empty cells
};

// Errors of every method against ground truth on the shared validity mask
// (intersection of ground truth and all methods, per scan). Cells with no
// valid column anywhere are left empty and reported in `excluded`.
ReportTable evaluate_methods(const std::vector<EvalScan>& scans,
                             const std::vector<MethodEstimates>& methods,
                             const EvalOptions& options = {});

// Text rendering in the style of the published tables (regional=false gives
// the per-surface aggregate, regional=true the per-surface-per-region view).
std::string render_text(const ReportTable& table, bool regional);
std::string render_csv(const ReportTable& table);
ReportTable parse_report_csv(const std::string& csv);

enum class Pipeline { seg, seg_reg, both };

Pipeline pipeline_from_string(const std::string& s);
const char* to_string(Pipeline p);

struct XvalConfig {
    Pipeline pipeline = Pipeline::both;
    NetworkConfig net;
    TrainingConfig train;
    GpConfig gp;
    int k = 0;  // 0 = patient count (leave-one-patient-out)
    unsigned threads = 1;
    EvalOptions eval;
};

struct FoldArtifacts {
    FoldSpec fold;
    Parameters params;
    std::vector<double> loss_history;
    std::vector<std::string> image_ids;  // the fold's test scans, dataset order
    std::map<std::string, std::vector<SurfaceSet>> estimates;  // method -> per scan
};

struct XvalResult {
    ReportTable table;
    std::vector<FoldArtifacts> folds;
};

// Full protocol: per fold train on the other patients, segment the held-out
// patient's scans, pool errors across folds into one table. Grader-2 and
// external estimates, when present, appear as extra columns and extend the
// shared mask.
XvalResult run_cross_validation(const std::vector<PatientRecord>& dataset,
                                const XvalConfig& config);

}  // namespace octseg
