#include "octseg/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace octseg {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << text;
    if (!out) throw ValidationError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// PGM

PgmImage read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open image " + path.string());

    auto next_token = [&]() -> std::string {
        std::string tok;
        for (;;) {
            int ch = in.get();
            if (ch == EOF) throw ValidationError("truncated PGM header in " + path.string());
            if (ch == '#') {
                std::string dump;
                std::getline(in, dump);
                continue;
            }
            if (std::isspace(ch)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok += static_cast<char>(ch);
        }
    };

    if (next_token() != "P5")
        throw ValidationError(path.string() + ": not a binary PGM (P5) file");
    PgmImage img;
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    img.maxval = std::stoi(next_token());
    if (img.width < 1 || img.height < 1 || img.maxval < 1 || img.maxval > 65535)
        throw ValidationError(path.string() + ": bad PGM header");

    std::size_t count = static_cast<std::size_t>(img.width) * img.height;
    img.pixels.resize(count);
    if (img.maxval < 256) {
        std::vector<std::uint8_t> raw(count);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
        if (!in) throw ValidationError(path.string() + ": truncated PGM payload");
        for (std::size_t i = 0; i < count; ++i) img.pixels[i] = raw[i];
    } else {
        std::vector<std::uint8_t> raw(count * 2);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!in) throw ValidationError(path.string() + ": truncated PGM payload");
        for (std::size_t i = 0; i < count; ++i)  // big-endian per the format
            img.pixels[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
    return img;
}

ImageF normalize_pgm(const PgmImage& img) {
    ImageF out(img.height, img.width);
    const double maxval = static_cast<double>(img.maxval);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            out(r, c) = img.pixels[static_cast<std::size_t>(r) * img.width + c] / maxval;
    return out;
}

void write_pgm(const fs::path& path, const ImageF& img, int bits) {
    if (bits != 8 && bits != 16) throw ValidationError("write_pgm: bits must be 8 or 16");
    const int maxval = bits == 8 ? 255 : 65535;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write image " + path.string());
    out << "P5\n" << img.cols() << ' ' << img.rows() << '\n' << maxval << '\n';
    for (int r = 0; r < img.rows(); ++r)
        for (int c = 0; c < img.cols(); ++c) {
            double v = std::clamp(img(r, c), 0.0, 1.0);
            auto q = static_cast<unsigned>(std::lround(v * maxval));
            if (bits == 8) {
                out.put(static_cast<char>(q));
            } else {
                out.put(static_cast<char>(q >> 8));
                out.put(static_cast<char>(q & 0xff));
            }
        }
    if (!out) throw ValidationError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Surface CSV

SurfaceSet read_surface_csv(const fs::path& path, int expected_width) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open surface csv " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError(path.string() + ": empty surface csv");
    // Header "surface_id,c0,c1,...": column count fixes the width.
    int width = -1;
    {
        int commas = static_cast<int>(std::count(line.begin(), line.end(), ','));
        width = commas;
    }
    if (expected_width >= 0 && width != expected_width)
        throw ValidationError(format_string("%s: surface csv has %d columns, image width is %d",
                                            path.string().c_str(), width, expected_width));
    SurfaceSet set(width);
    int lineno = 1;
    std::vector<bool> seen(kNumSurfaces, false);
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        if (!std::getline(row, field, ','))
            throw ValidationError(format_string("%s:%d: missing surface id",
                                                path.string().c_str(), lineno));
        int sid = std::atoi(field.c_str());
        int s = -1;
        try {
            s = surface_index(sid);
        } catch (const ValidationError&) {
            throw ValidationError(format_string("%s:%d: unknown surface id %d",
                                                path.string().c_str(), lineno, sid));
        }
        if (seen[s])
            throw ValidationError(format_string("%s:%d: duplicate surface id %d",
                                                path.string().c_str(), lineno, sid));
        seen[s] = true;
        int c = 0;
        while (std::getline(row, field, ',')) {
            if (c >= width)
                throw ValidationError(format_string("%s:%d: too many columns",
                                                    path.string().c_str(), lineno));
            char* end = nullptr;
            double v = std::strtod(field.c_str(), &end);
            bool parsed = end != field.c_str();
            if (!parsed || field == "nan" || field == "NaN" || std::isnan(v)) {
                // invalid column
            } else {
                set.set(s, c, v);
            }
            ++c;
        }
        if (c != width)
            throw ValidationError(format_string("%s:%d: expected %d columns, got %d",
                                                path.string().c_str(), lineno, width, c));
    }
    return set;
}

void write_surface_csv(const fs::path& path, const SurfaceSet& surfaces) {
    std::ostringstream out;
    out << "surface_id";
    for (int c = 0; c < surfaces.width(); ++c) out << ",c" << c;
    out << '\n';
    for (int s = 0; s < kNumSurfaces; ++s) {
        out << kSurfaceIds[s];
        for (int c = 0; c < surfaces.width(); ++c) {
            if (surfaces.is_valid(s, c))
                out << ',' << format_string("%.17g", surfaces.position(s, c));
            else
                out << ",nan";
        }
        out << '\n';
    }
    write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

struct ManifestEntry {
    std::string patient_id, image_id, region;
    std::string image, ground_truth, grader2;
    std::map<std::string, std::string> estimates;
    double transversal_um = 11.11;
    double axial_um = 3.867;
    int lineno = 0;
};

std::vector<ManifestEntry> parse_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    int lineno = 0;
    ManifestEntry* cur = nullptr;
    while (std::getline(in, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        std::string trimmed = line.substr(first, last - first + 1);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        if (trimmed == "[image]") {
            entries.emplace_back();
            entries.back().lineno = lineno;
            cur = &entries.back();
            continue;
        }
        auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw ValidationError(format_string("%s:%d: expected key = value",
                                                path.string().c_str(), lineno));
        if (!cur)
            throw ValidationError(format_string("%s:%d: key outside an [image] block",
                                                path.string().c_str(), lineno));
        auto strip = [](std::string s) {
            auto b = s.find_first_not_of(" \t");
            auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = strip(trimmed.substr(0, eq));
        std::string value = strip(trimmed.substr(eq + 1));
        if (key == "patient_id") cur->patient_id = value;
        else if (key == "image_id") cur->image_id = value;
        else if (key == "region") cur->region = value;
        else if (key == "image") cur->image = value;
        else if (key == "ground_truth") cur->ground_truth = value;
        else if (key == "grader2") cur->grader2 = value;
        else if (key == "transversal_um") cur->transversal_um = std::strtod(value.c_str(), nullptr);
        else if (key == "axial_um") cur->axial_um = std::strtod(value.c_str(), nullptr);
        else if (key.rfind("estimate.", 0) == 0) cur->estimates[key.substr(9)] = value;
        else
            throw ValidationError(format_string("%s:%d: unknown key '%s'",
                                                path.string().c_str(), lineno, key.c_str()));
    }
    return entries;
}

}  // namespace

std::vector<PatientRecord> load_dataset(const fs::path& manifest_path, bool enforce_regions) {
    auto entries = parse_manifest(manifest_path);
    if (entries.empty())
        throw ValidationError(manifest_path.string() + ": manifest has no [image] blocks");
    const fs::path base = manifest_path.parent_path();

    std::vector<PatientRecord> dataset;
    std::map<std::string, std::size_t> patient_index;
    for (const auto& e : entries) {
        if (e.patient_id.empty() || e.image_id.empty() || e.image.empty() ||
            e.ground_truth.empty() || e.region.empty())
            throw ValidationError(format_string(
                "%s:%d: block needs patient_id, image_id, region, image, ground_truth",
                manifest_path.string().c_str(), e.lineno));

        ScanRecord rec;
        fs::path image_path = base / e.image;
        rec.scan.pixels = normalize_pgm(read_pgm(image_path));
        rec.scan.patient_id = e.patient_id;
        rec.scan.image_id = e.image_id;
        rec.scan.region = region_from_string(e.region);
        rec.scan.geometry.transversal_um_per_px = e.transversal_um;
        rec.scan.geometry.axial_um_per_px = e.axial_um;
        rec.scan.zero_region = detect_zero_regions(rec.scan.pixels);
        rec.scan.validate();
        rec.ground_truth = read_surface_csv(base / e.ground_truth, rec.scan.width());
        if (!e.grader2.empty())
            rec.grader2 = read_surface_csv(base / e.grader2, rec.scan.width());
        for (const auto& [method, rel] : e.estimates)
            rec.external[method] = read_surface_csv(base / rel, rec.scan.width());

        auto it = patient_index.find(e.patient_id);
        if (it == patient_index.end()) {
            patient_index[e.patient_id] = dataset.size();
            dataset.push_back({e.patient_id, {}});
            it = patient_index.find(e.patient_id);
        }
        dataset[it->second].scans.push_back(std::move(rec));
    }
    for (const auto& p : dataset) p.validate(enforce_regions);
    return dataset;
}

std::filesystem::path save_dataset(const std::vector<PatientRecord>& dataset,
                                   const fs::path& dir) {
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "surfaces");
    std::ostringstream manifest;
    manifest << "# octseg dataset manifest\n";
    for (const auto& patient : dataset)
        for (const auto& rec : patient.scans) {
            const std::string& id = rec.scan.image_id;
            write_pgm(dir / "images" / (id + ".pgm"), rec.scan.pixels, 16);
            write_surface_csv(dir / "surfaces" / (id + "_gt.csv"), rec.ground_truth);
            manifest << "\n[image]\n";
            manifest << "patient_id = " << patient.patient_id << '\n';
            manifest << "image_id = " << id << '\n';
            manifest << "region = " << to_string(rec.scan.region) << '\n';
            manifest << format_string("transversal_um = %.17g\n",
                                      rec.scan.geometry.transversal_um_per_px);
            manifest << format_string("axial_um = %.17g\n", rec.scan.geometry.axial_um_per_px);
            manifest << "image = images/" << id << ".pgm\n";
            manifest << "ground_truth = surfaces/" << id << "_gt.csv\n";
            if (rec.grader2) {
                write_surface_csv(dir / "surfaces" / (id + "_g2.csv"), *rec.grader2);
                manifest << "grader2 = surfaces/" << id << "_g2.csv\n";
            }
            for (const auto& [method, est] : rec.external) {
                std::string rel = "surfaces/" + id + "_" + method + ".csv";
                write_surface_csv(dir / rel, est);
                manifest << "estimate." << method << " = " << rel << '\n';
            }
        }
    fs::path manifest_path = dir / "manifest.txt";
    write_text_file(manifest_path, manifest.str());
    return manifest_path;
}

MaskGrid detect_zero_regions(const ImageF& image, int min_size) {
    if (min_size < 1) throw ValidationError("detect_zero_regions: min_size < 1");
    const int h = image.rows(), w = image.cols();
    if (h < min_size || w < min_size) return {};

    // Summed-area table of the zero indicator; a pixel belongs to a zero
    // region iff some min_size x min_size window containing it is all zero
    // (morphological opening of the zero mask with a square box).
    std::vector<std::uint32_t> sat(static_cast<std::size_t>(h + 1) * (w + 1), 0);
    auto at = [&](int r, int c) -> std::uint32_t& {
        return sat[static_cast<std::size_t>(r) * (w + 1) + c];
    };
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            std::uint32_t z = image(r, c) == 0.0 ? 1u : 0u;
            at(r + 1, c + 1) = z + at(r, c + 1) + at(r + 1, c) - at(r, c);
        }
    auto window_all_zero = [&](int r0, int c0) {
        std::uint32_t s = at(r0 + min_size, c0 + min_size) - at(r0, c0 + min_size) -
                          at(r0 + min_size, c0) + at(r0, c0);
        return s == static_cast<std::uint32_t>(min_size) * static_cast<std::uint32_t>(min_size);
    };

    // Erosion: mark window origins that are fully zero.
    Grid2D<std::uint8_t> origins(h - min_size + 1, w - min_size + 1, 0);
    bool any = false;
    for (int r = 0; r + min_size <= h; ++r)
        for (int c = 0; c + min_size <= w; ++c)
            if (window_all_zero(r, c)) {
                origins(r, c) = 1;
                any = true;
            }
    if (!any) return {};

    // Dilation via a second summed-area table over origins.
    std::vector<std::uint32_t> sat2(static_cast<std::size_t>(origins.rows() + 1) *
                                        (origins.cols() + 1),
                                    0);
    auto at2 = [&](int r, int c) -> std::uint32_t& {
        return sat2[static_cast<std::size_t>(r) * (origins.cols() + 1) + c];
    };
    for (int r = 0; r < origins.rows(); ++r)
        for (int c = 0; c < origins.cols(); ++c)
            at2(r + 1, c + 1) = origins(r, c) + at2(r, c + 1) + at2(r + 1, c) - at2(r, c);

    MaskGrid mask(h, w, 0);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            int r0 = std::max(0, r - min_size + 1);
            int c0 = std::max(0, c - min_size + 1);
            int r1 = std::min(origins.rows() - 1, r);
            int c1 = std::min(origins.cols() - 1, c);
            if (r1 < r0 || c1 < c0) continue;
            std::uint32_t s = at2(r1 + 1, c1 + 1) - at2(r0, c1 + 1) - at2(r1 + 1, c0) + at2(r0, c0);
            if (s > 0) mask(r, c) = 1;
        }
    return mask;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCheckpointMagic[8] = {'O', 'C', 'T', 'S', 'E', 'G', 'W', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    const std::string path;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw ValidationError(path + ": truncated checkpoint");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
            bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos++])) << (8 * i);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

std::string network_config_to_text(const NetworkConfig& c) {
    std::ostringstream out;
    out << "input_channels=" << c.input_channels << '\n';
    out << "num_classes=" << c.num_classes << '\n';
    out << "stem_channels=" << c.stem_channels << '\n';
    out << "kernel_size=" << c.kernel_size << '\n';
    out << "levels=" << c.levels << '\n';
    out << "activation=" << (c.activation == Activation::tanh_act ? "tanh" : "identity") << '\n';
    out << "channel_affine=" << (c.channel_affine ? 1 : 0) << '\n';
    out << "seed=" << c.seed << '\n';
    out << "blocks=";
    for (std::size_t i = 0; i < c.blocks.size(); ++i) {
        if (i) out << ' ';
        out << c.blocks[i].layers << 'x' << c.blocks[i].growth;
    }
    out << '\n';
    return out.str();
}

NetworkConfig network_config_from_text(const std::string& text) {
    NetworkConfig c;
    c.blocks.clear();
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        if (key == "input_channels") c.input_channels = std::atoi(value.c_str());
        else if (key == "num_classes") c.num_classes = std::atoi(value.c_str());
        else if (key == "stem_channels") c.stem_channels = std::atoi(value.c_str());
        else if (key == "kernel_size") c.kernel_size = std::atoi(value.c_str());
        else if (key == "levels") c.levels = std::atoi(value.c_str());
        else if (key == "activation")
            c.activation = value == "identity" ? Activation::identity : Activation::tanh_act;
        else if (key == "channel_affine") c.channel_affine = value == "1";
        else if (key == "seed") c.seed = std::strtoull(value.c_str(), nullptr, 10);
        else if (key == "blocks") {
            std::istringstream bs(value);
            std::string tok;
            while (bs >> tok) {
                auto x = tok.find('x');
                if (x == std::string::npos) throw ValidationError("checkpoint: bad block spec");
                c.blocks.push_back(
                    {std::atoi(tok.substr(0, x).c_str()), std::atoi(tok.substr(x + 1).c_str())});
            }
        }
    }
    return c;
}

}  // namespace

void save_checkpoint(const fs::path& path, const NetworkConfig& config,
                     const Parameters& params) {
    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    std::string header = network_config_to_text(config);
    put_u32(out, static_cast<std::uint32_t>(header.size()));
    out += header;
    put_u32(out, static_cast<std::uint32_t>(params.groups().size()));
    for (const auto& g : params.groups()) {
        put_u32(out, static_cast<std::uint32_t>(g.name.size()));
        out += g.name;
        put_u32(out, static_cast<std::uint32_t>(g.shape.size()));
        for (int d : g.shape) put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : g.values) put_f64(out, v);
    }
    write_text_file(path, out);
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::string buf = read_text_file(path);
    Reader r{buf, 0, path.string()};
    if (r.str(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic)))
        throw ValidationError(path.string() + ": not an octseg checkpoint");
    Checkpoint ck;
    std::uint32_t header_len = r.u32();
    ck.config = network_config_from_text(r.str(header_len));
    std::uint32_t ngroups = r.u32();
    for (std::uint32_t i = 0; i < ngroups; ++i) {
        std::uint32_t name_len = r.u32();
        std::string name = r.str(name_len);
        std::uint32_t ndims = r.u32();
        std::vector<int> shape(ndims);
        std::size_t count = 1;
        for (auto& d : shape) {
            d = static_cast<int>(r.u32());
            count *= static_cast<std::size_t>(d);
        }
        auto& group = ck.params.add(name, shape);
        for (std::size_t j = 0; j < count; ++j) group.values[j] = r.f64();
    }
    return ck;
}

// ---------------------------------------------------------------------------
// Key/value config

KeyValueConfig KeyValueConfig::from_file(const fs::path& path) {
    KeyValueConfig cfg = from_string(read_text_file(path));
    cfg.source_ = path.string();
    return cfg;
}

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = line.find_last_not_of(" \t\r");
        std::string trimmed = line.substr(first, last - first + 1);
        if (trimmed.empty() || trimmed[0] == '#') continue;
        auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw ValidationError(format_string("config line %d: expected key = value", lineno));
        auto strip = [](std::string s) {
            auto b = s.find_first_not_of(" \t");
            auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        cfg.entries_[strip(trimmed.substr(0, eq))] = strip(trimmed.substr(eq + 1));
    }
    return cfg;
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    char* end = nullptr;
    double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str())
        throw ValidationError("config key " + key + ": not a number: " + it->second);
    return v;
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    return std::atoi(it->second.c_str());
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    return std::strtoull(it->second.c_str(), nullptr, 10);
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ValidationError("config key " + key + ": not a boolean: " + v);
}

}  // namespace octseg
