// octseg: synthesize, train, segment, evaluate, and cross-validate retinal
// OCT surface segmentations (SEG and SEG+REG pipelines).

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "octseg/common.hpp"
#include "octseg/eval.hpp"
#include "octseg/extraction.hpp"
#include "octseg/fcn.hpp"
#include "octseg/gp.hpp"
#include "octseg/io.hpp"
#include "octseg/kernels.hpp"
#include "octseg/model.hpp"
#include "octseg/render.hpp"
#include "octseg/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace octseg;

namespace {

constexpr const char* kVersion = "1.0.0";

// Precedence: defaults < flags < config file (documented in the README).
void apply_config(const KeyValueConfig& kv, SynthConfig& c) {
    c.num_patients = kv.get_int("synth.patients", c.num_patients);
    c.width = kv.get_int("synth.width", c.width);
    c.height = kv.get_int("synth.height", c.height);
    c.smoothness_scale_px = kv.get_double("synth.smoothness", c.smoothness_scale_px);
    c.min_band_thickness_px = kv.get_double("synth.min_thickness", c.min_band_thickness_px);
    c.noise_std = kv.get_double("synth.noise_std", c.noise_std);
    c.grader2_noise_std = kv.get_double("synth.grader2_noise", c.grader2_noise_std);
    c.seed = kv.get_u64("synth.seed", c.seed);
}

void apply_config(const KeyValueConfig& kv, NetworkConfig& c) {
    c.levels = kv.get_int("net.levels", c.levels);
    c.stem_channels = kv.get_int("net.stem", c.stem_channels);
    c.kernel_size = kv.get_int("net.kernel", c.kernel_size);
    c.channel_affine = kv.get_bool("net.affine", c.channel_affine);
    c.seed = kv.get_u64("net.seed", c.seed);
    if (kv.has("net.block_layers") || kv.has("net.block_growth") || kv.has("net.levels")) {
        int layers = kv.get_int("net.block_layers", c.blocks.empty() ? 3 : c.blocks[0].layers);
        int growth = kv.get_int("net.block_growth", c.blocks.empty() ? 8 : c.blocks[0].growth);
        c.blocks.assign(c.levels + 1, {layers, growth});
    }
    if (kv.has("net.blocks")) {  // e.g. "2x6 2x6 3x8"
        c.blocks.clear();
        std::istringstream in(kv.get_string("net.blocks", ""));
        std::string tok;
        while (in >> tok) {
            auto x = tok.find('x');
            if (x == std::string::npos)
                throw ValidationError("net.blocks: expected LAYERSxGROWTH entries");
            c.blocks.push_back(
                {std::atoi(tok.substr(0, x).c_str()), std::atoi(tok.substr(x + 1).c_str())});
        }
    }
}

void apply_config(const KeyValueConfig& kv, TrainingConfig& c) {
    c.learning_rate = kv.get_double("train.lr", c.learning_rate);
    c.epochs = kv.get_int("train.epochs", c.epochs);
    c.batch_size = kv.get_int("train.batch", c.batch_size);
    c.minority_weight = kv.get_double("train.minority_weight", c.minority_weight);
    c.zero_region_mask = kv.get_bool("train.zero_mask", c.zero_region_mask);
    c.seed = kv.get_u64("train.seed", c.seed);
    if (kv.has("train.minority_classes")) {
        c.minority_classes.clear();
        std::istringstream in(kv.get_string("train.minority_classes", ""));
        std::string tok;
        while (std::getline(in, tok, ','))
            if (!tok.empty()) c.minority_classes.push_back(std::atoi(tok.c_str()));
    }
}

void apply_config(const KeyValueConfig& kv, GpConfig& c) {
    c.kernel.variance = kv.get_double("kernel.variance", c.kernel.variance);
    c.kernel.length_scale = kv.get_double("kernel.length_scale", c.kernel.length_scale);
    c.noise_variance = kv.get_double("noise_variance", c.noise_variance);
    c.jitter = kv.get_double("jitter", c.jitter);
    c.subsample_stride = kv.get_int("gp.subsample_stride", c.subsample_stride);
}

json to_json(const SynthConfig& c) {
    return {{"patients", c.num_patients},
            {"width", c.width},
            {"height", c.height},
            {"smoothness", c.smoothness_scale_px},
            {"min_thickness", c.min_band_thickness_px},
            {"layer_means", c.layer_means},
            {"noise_std", c.noise_std},
            {"grader2_noise", c.grader2_noise_std},
            {"seed", c.seed}};
}

json to_json(const NetworkConfig& c) {
    json blocks = json::array();
    for (const auto& b : c.blocks) blocks.push_back({{"layers", b.layers}, {"growth", b.growth}});
    return {{"input_channels", c.input_channels},
            {"num_classes", c.num_classes},
            {"stem", c.stem_channels},
            {"kernel", c.kernel_size},
            {"levels", c.levels},
            {"blocks", blocks},
            {"activation", c.activation == Activation::tanh_act ? "tanh" : "identity"},
            {"affine", c.channel_affine},
            {"seed", c.seed}};
}

json to_json(const TrainingConfig& c) {
    return {{"lr", c.learning_rate},
            {"epochs", c.epochs},
            {"batch", c.batch_size},
            {"minority_weight", c.minority_weight},
            {"minority_classes", c.minority_classes},
            {"zero_mask", c.zero_region_mask},
            {"seed", c.seed}};
}

json to_json(const GpConfig& c) {
    return {{"kernel.variance", c.kernel.variance},
            {"kernel.length_scale", c.kernel.length_scale},
            {"noise_variance", c.noise_variance},
            {"jitter", c.jitter},
            {"subsample_stride", c.subsample_stride}};
}

// Machine-readable run record; with the same inputs and seeds it pins the
// run down bit-for-bit.
void write_run_record(const fs::path& dir, const std::string& command, json detail) {
    detail["tool"] = "octseg";
    detail["version"] = kVersion;
    detail["command"] = command;
    detail["kernel_backend"] = kernels::active().name;
    detail["threads"] = thread_count();
    fs::create_directories(dir);
    std::ofstream out(dir / "run_record.json");
    out << detail.dump(2) << '\n';
}

std::vector<TrainSample> collect_training_samples(const std::vector<PatientRecord>& dataset,
                                                  std::vector<LabelGrid>& labels_storage) {
    std::vector<const ScanRecord*> recs;
    for (const auto& p : dataset)
        for (const auto& rec : p.scans) recs.push_back(&rec);
    labels_storage.clear();
    labels_storage.reserve(recs.size());
    for (const ScanRecord* rec : recs) {
        auto ordering = validate_surface_ordering(rec->ground_truth);
        if (!ordering.ordered || !rec->ground_truth.fully_valid())
            throw ValidationError("image " + rec->scan.image_id +
                                  ": ground truth must be fully valid and ordered to train");
        labels_storage.push_back(
            rasterize_surfaces(rec->ground_truth, rec->scan.height(), rec->scan.width()));
    }
    std::vector<TrainSample> samples;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const BScan& scan = recs[i]->scan;
        samples.push_back({&scan.pixels, &labels_storage[i],
                           scan.zero_region.empty() ? nullptr : &scan.zero_region});
    }
    return samples;
}

std::string method_file_name(const std::string& method) {
    std::string s = method;
    for (char& c : s)
        if (c == '+') c = '_';
    return s;
}

int run(int argc, char** argv) {
    CLI::App app{"Retinal OCT surface segmentation (SEG / SEG+REG) toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path,
                   "key=value config file; overrides command-line flags")
        ->check(CLI::ExistingFile);

    SynthConfig synth_cfg;
    NetworkConfig net_cfg;
    TrainingConfig train_cfg;
    GpConfig gp_cfg;
    int block_layers = 3, block_growth = 8;

    auto add_net_flags = [&](CLI::App* cmd) {
        cmd->add_option("--levels", net_cfg.levels, "downsample/upsample depth");
        cmd->add_option("--stem", net_cfg.stem_channels, "stem channels");
        cmd->add_option("--block-layers", block_layers, "layers per dense block");
        cmd->add_option("--block-growth", block_growth, "growth rate per dense block");
        cmd->add_option("--kernel-size", net_cfg.kernel_size, "conv kernel size (odd)");
        cmd->add_flag("--affine", net_cfg.channel_affine, "learnable per-channel scaling");
        cmd->add_option("--net-seed", net_cfg.seed, "parameter init seed");
    };
    auto add_train_flags = [&](CLI::App* cmd) {
        cmd->add_option("--epochs", train_cfg.epochs, "training epochs");
        cmd->add_option("--lr", train_cfg.learning_rate, "SGD learning rate");
        cmd->add_option("--batch", train_cfg.batch_size, "batch size");
        cmd->add_option("--minority-weight", train_cfg.minority_weight,
                        "loss weight for minority classes");
        cmd->add_option("--minority-classes", train_cfg.minority_classes,
                        "explicit minority class ids (default: two thinnest bands)");
        cmd->add_flag("!--no-zero-mask", train_cfg.zero_region_mask,
                      "disable zero-region exclusion");
        cmd->add_option("--train-seed", train_cfg.seed, "shuffle seed");
    };
    auto add_gp_flags = [&](CLI::App* cmd) {
        cmd->add_option("--gp-variance", gp_cfg.kernel.variance, "RBF variance (px^2)");
        cmd->add_option("--gp-length-scale", gp_cfg.kernel.length_scale, "RBF length scale (px)");
        cmd->add_option("--gp-noise", gp_cfg.noise_variance, "observation noise (px^2)");
        cmd->add_option("--gp-jitter", gp_cfg.jitter, "Cholesky jitter");
    };

    // synth ------------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string out_dir;
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--patients", synth_cfg.num_patients, "patient count");
    synth->add_option("--width", synth_cfg.width, "image width");
    synth->add_option("--height", synth_cfg.height, "image height");
    synth->add_option("--smoothness", synth_cfg.smoothness_scale_px,
                      "surface undulation amplitude (px)");
    synth->add_option("--min-thickness", synth_cfg.min_band_thickness_px,
                      "minimum band thickness (px)");
    synth->add_option("--noise", synth_cfg.noise_std, "intensity noise std");
    synth->add_option("--grader2-noise", synth_cfg.grader2_noise_std,
                      "second-grader perturbation (px), 0 disables");
    synth->add_option("--seed", synth_cfg.seed, "generator seed");

    // train ------------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "train the dense FCN on a dataset");
    std::string manifest_path, checkpoint_path;
    train_cmd->add_option("--manifest", manifest_path, "dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--out", checkpoint_path, "checkpoint output path")->required();
    bool lax_regions = false;
    train_cmd->add_flag("--lax-regions", lax_regions,
                        "skip the per-patient region distribution check");
    add_net_flags(train_cmd);
    add_train_flags(train_cmd);

    // segment ----------------------------------------------------------
    auto* segment = app.add_subcommand("segment", "segment scans with a trained checkpoint");
    std::string pipeline_name = "seg+reg";
    segment->add_option("--manifest", manifest_path, "dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    segment->add_option("--checkpoint", checkpoint_path, "trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    segment->add_option("--out", out_dir, "output directory")->required();
    segment->add_option("--pipeline", pipeline_name, "seg | seg+reg | both");
    segment->add_flag("--lax-regions", lax_regions);
    add_gp_flags(segment);

    // evaluate ----------------------------------------------------------
    auto* evaluate = app.add_subcommand(
        "evaluate", "score estimates in the manifest (and an estimates dir) against grader 1");
    std::string estimates_dir;
    evaluate->add_option("--manifest", manifest_path, "dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate->add_option("--estimates", estimates_dir,
                         "directory of <image_id>.<method>.csv estimate files");
    evaluate->add_option("--out", out_dir, "output directory")->required();
    bool per_image_average = false;
    evaluate->add_flag("--per-image-average", per_image_average,
                       "average per image instead of pooling pixels");
    evaluate->add_flag("--lax-regions", lax_regions);

    // report -------------------------------------------------------------
    auto* report = app.add_subcommand("report", "render a report CSV as aligned text");
    std::string report_csv;
    bool regional = false;
    report->add_option("--in", report_csv, "report csv produced by evaluate/xval")
        ->required()
        ->check(CLI::ExistingFile);
    report->add_flag("--regional", regional, "per-region table instead of the aggregate");
    std::string report_out;
    report->add_option("--out", report_out, "write to file instead of stdout");

    // render -------------------------------------------------------------
    auto* render = app.add_subcommand("render", "overlay surfaces on a B-scan as SVG");
    std::string image_id, render_out;
    render->add_option("--manifest", manifest_path, "dataset manifest")
        ->required()
        ->check(CLI::ExistingFile);
    render->add_option("--image-id", image_id, "image to render")->required();
    render->add_option("--out", render_out, "output SVG path")->required();
    render->add_flag("--lax-regions", lax_regions);

    // xval ---------------------------------------------------------------
    auto* xval = app.add_subcommand("xval", "leave-one-patient-out cross validation");
    bool xval_synth = false;
    int xval_k = 0;
    unsigned threads = thread_count();
    xval->add_option("--manifest", manifest_path, "dataset manifest (omit with --synth)");
    xval->add_flag("--synth", xval_synth, "generate the dataset instead of loading one");
    xval->add_option("--out", out_dir, "output directory")->required();
    xval->add_option("--pipeline", pipeline_name, "seg | seg+reg | both");
    xval->add_option("--k", xval_k, "fold count (default: patient count)");
    xval->add_option("--threads", threads, "parallel folds");
    xval->add_flag("--per-image-average", per_image_average);
    xval->add_option("--patients", synth_cfg.num_patients, "synthetic patient count");
    xval->add_option("--width", synth_cfg.width, "synthetic image width");
    xval->add_option("--height", synth_cfg.height, "synthetic image height");
    xval->add_option("--noise", synth_cfg.noise_std, "synthetic intensity noise std");
    xval->add_option("--smoothness", synth_cfg.smoothness_scale_px,
                     "synthetic undulation amplitude (px)");
    xval->add_option("--seed", synth_cfg.seed, "synthetic generator seed");
    add_net_flags(xval);
    add_train_flags(xval);
    add_gp_flags(xval);

    CLI11_PARSE(app, argc, argv);

    // uniform block flags, then the config file on top of everything
    if (train_cmd->parsed() || xval->parsed())
        net_cfg.blocks.assign(net_cfg.levels + 1, {block_layers, block_growth});
    if (!config_path.empty()) {
        KeyValueConfig kv = KeyValueConfig::from_file(config_path);
        apply_config(kv, synth_cfg);
        apply_config(kv, net_cfg);
        apply_config(kv, train_cfg);
        apply_config(kv, gp_cfg);
        if (kv.has("pipeline")) pipeline_name = kv.get_string("pipeline", pipeline_name);
    }

    if (synth->parsed()) {
        auto dataset = generate_synthetic(synth_cfg);
        fs::path manifest = save_dataset(dataset, out_dir);
        write_run_record(out_dir, "synth",
                         {{"synth", to_json(synth_cfg)}, {"manifest", manifest.string()}});
        std::cout << "wrote " << manifest.string() << '\n';
        return 0;
    }

    if (train_cmd->parsed()) {
        auto dataset = load_dataset(manifest_path, !lax_regions);
        std::vector<LabelGrid> labels;
        auto samples = collect_training_samples(dataset, labels);
        TrainResult result = train(samples, train_cfg, net_cfg);
        save_checkpoint(checkpoint_path, net_cfg, result.params);
        fs::path record_dir = fs::path(checkpoint_path).parent_path();
        if (record_dir.empty()) record_dir = ".";
        json detail{{"net", to_json(net_cfg)},
                    {"train", to_json(train_cfg)},
                    {"manifest", manifest_path},
                    {"checkpoint", checkpoint_path},
                    {"class_weights", result.class_weights},
                    {"loss_history", result.loss_history}};
        write_run_record(record_dir, "train", detail);
        std::cout << "final loss " << result.loss_history.back() << ", checkpoint "
                  << checkpoint_path << '\n';
        return 0;
    }

    if (segment->parsed()) {
        Pipeline pipeline = pipeline_from_string(pipeline_name);
        auto dataset = load_dataset(manifest_path, !lax_regions);
        Checkpoint ck = load_checkpoint(checkpoint_path);
        DenseFcn net(ck.config);
        fs::create_directories(out_dir);
        int files = 0;
        for (const auto& patient : dataset)
            for (const auto& rec : patient.scans) {
                FeatureMap probs = net.forward(rec.scan.pixels, ck.params);
                std::map<std::string, SegResult> results;
                if (pipeline != Pipeline::seg_reg) results["SEG"] = seg_pipeline(probs);
                if (pipeline != Pipeline::seg)
                    results["SEG+REG"] = seg_reg_pipeline(probs, gp_cfg);
                for (const auto& [method, res] : results) {
                    if (!res.unresolved.empty()) {
                        std::string ids;
                        for (int id : res.unresolved) ids += " " + std::to_string(id);
                        log_warn("%s %s: unresolved surfaces%s", rec.scan.image_id.c_str(),
                                 method.c_str(), ids.c_str());
                    }
                    fs::path out = fs::path(out_dir) / (rec.scan.image_id + "." +
                                                        method_file_name(method) + ".csv");
                    write_surface_csv(out, res.surfaces);
                    ++files;
                }
            }
        write_run_record(out_dir, "segment",
                         {{"manifest", manifest_path},
                          {"checkpoint", checkpoint_path},
                          {"pipeline", pipeline_name},
                          {"gp", to_json(gp_cfg)},
                          {"files", files}});
        std::cout << "wrote " << files << " estimate files to " << out_dir << '\n';
        return 0;
    }

    if (evaluate->parsed()) {
        auto dataset = load_dataset(manifest_path, !lax_regions);
        std::vector<EvalScan> scans;
        std::vector<std::string> method_names;
        std::map<std::string, MethodEstimates> methods;

        // methods available on every scan (manifest + estimates dir)
        bool first = true;
        std::set<std::string> common;
        bool grader2_everywhere = true;
        for (const auto& p : dataset)
            for (const auto& rec : p.scans) {
                std::set<std::string> here;
                for (const auto& [name, est] : rec.external) here.insert(name);
                if (!estimates_dir.empty())
                    for (const char* method : {"SEG", "SEG+REG"}) {
                        fs::path f = fs::path(estimates_dir) /
                                     (rec.scan.image_id + "." + method_file_name(method) + ".csv");
                        if (fs::exists(f)) here.insert(method);
                    }
                if (first) {
                    common = here;
                    first = false;
                } else {
                    std::set<std::string> kept;
                    for (const auto& name : common)
                        if (here.count(name)) kept.insert(name);
                    common = kept;
                }
                if (!rec.grader2) grader2_everywhere = false;
            }
        if (common.empty() && !grader2_everywhere)
            throw ValidationError("evaluate: no method present on every scan");

        for (const auto& name : {std::string("SEG"), std::string("SEG+REG")})
            if (common.count(name)) method_names.push_back(name);
        for (const auto& name : common)
            if (name != "SEG" && name != "SEG+REG") method_names.push_back(name);
        if (grader2_everywhere) method_names.push_back("Inter-Observer");
        for (const auto& name : method_names) methods[name] = {name, {}};

        for (const auto& p : dataset)
            for (const auto& rec : p.scans) {
                EvalScan es;
                es.region = rec.scan.region;
                es.axial_um_per_px = rec.scan.geometry.axial_um_per_px;
                es.ground_truth = &rec.ground_truth;
                scans.push_back(es);
                for (const auto& name : method_names) {
                    if (name == "Inter-Observer") {
                        methods[name].estimates.push_back(*rec.grader2);
                    } else if (rec.external.count(name)) {
                        methods[name].estimates.push_back(rec.external.at(name));
                    } else {
                        fs::path f = fs::path(estimates_dir) /
                                     (rec.scan.image_id + "." + method_file_name(name) + ".csv");
                        methods[name].estimates.push_back(read_surface_csv(f, rec.scan.width()));
                    }
                }
            }

        std::vector<MethodEstimates> ordered;
        for (const auto& name : method_names) ordered.push_back(std::move(methods[name]));
        EvalOptions opt;
        opt.per_image_average = per_image_average;
        ReportTable table = evaluate_methods(scans, ordered, opt);

        fs::create_directories(out_dir);
        write_text_file(fs::path(out_dir) / "report.csv", render_csv(table));
        write_text_file(fs::path(out_dir) / "report.txt",
                        render_text(table, false) + "\n" + render_text(table, true));
        write_run_record(out_dir, "evaluate",
                         {{"manifest", manifest_path},
                          {"estimates", estimates_dir},
                          {"methods", method_names},
                          {"per_image_average", per_image_average}});
        std::cout << render_text(table, false);
        return 0;
    }

    if (report->parsed()) {
        ReportTable table = parse_report_csv(read_text_file(report_csv));
        std::string text = render_text(table, regional);
        if (report_out.empty())
            std::cout << text;
        else
            write_text_file(report_out, text);
        return 0;
    }

    if (render->parsed()) {
        auto dataset = load_dataset(manifest_path, !lax_regions);
        for (const auto& p : dataset)
            for (const auto& rec : p.scans) {
                if (rec.scan.image_id != image_id) continue;
                std::vector<std::pair<std::string, const SurfaceSet*>> sets;
                sets.push_back({"grader1", &rec.ground_truth});
                if (rec.grader2) sets.push_back({"grader2", &*rec.grader2});
                for (const auto& [name, est] : rec.external) sets.push_back({name, &est});
                render_overlay(rec.scan, sets, render_out);
                std::cout << "wrote " << render_out << '\n';
                return 0;
            }
        throw ValidationError("render: image id '" + image_id + "' not found in manifest");
    }

    if (xval->parsed()) {
        XvalConfig cfg;
        cfg.pipeline = pipeline_from_string(pipeline_name);
        cfg.net = net_cfg;
        cfg.train = train_cfg;
        cfg.gp = gp_cfg;
        cfg.k = xval_k;
        cfg.threads = threads;
        cfg.eval.per_image_average = per_image_average;

        std::vector<PatientRecord> dataset;
        if (xval_synth) {
            dataset = generate_synthetic(synth_cfg);
        } else {
            if (manifest_path.empty())
                throw ValidationError("xval: need --manifest or --synth");
            dataset = load_dataset(manifest_path);
        }

        XvalResult result = run_cross_validation(dataset, cfg);

        fs::create_directories(out_dir);
        write_text_file(fs::path(out_dir) / "report.csv", render_csv(result.table));
        write_text_file(fs::path(out_dir) / "report.txt",
                        render_text(result.table, false) + "\n" +
                            render_text(result.table, true));
        fs::path folds_dir = fs::path(out_dir) / "folds";
        for (const auto& fold : result.folds) {
            fs::path fd = folds_dir / format_string("fold%02d", fold.fold.fold_id);
            fs::create_directories(fd);
            NetworkConfig fold_net = cfg.net;
            fold_net.seed = cfg.net.seed + static_cast<std::uint64_t>(fold.fold.fold_id);
            save_checkpoint(fd / "params.ckpt", fold_net, fold.params);
            for (const auto& [method, estimates] : fold.estimates)
                for (std::size_t i = 0; i < estimates.size(); ++i)
                    write_surface_csv(fd / (fold.image_ids[i] + "." +
                                            method_file_name(method) + ".csv"),
                                      estimates[i]);
        }
        json detail{{"pipeline", pipeline_name},
                    {"net", to_json(cfg.net)},
                    {"train", to_json(cfg.train)},
                    {"gp", to_json(cfg.gp)},
                    {"k", cfg.k},
                    {"per_image_average", per_image_average}};
        if (xval_synth)
            detail["synth"] = to_json(synth_cfg);
        else
            detail["manifest"] = manifest_path;
        write_run_record(out_dir, "xval", detail);
        std::cout << render_text(result.table, false);
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
