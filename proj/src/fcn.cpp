#include "octseg/fcn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "octseg/kernels.hpp"

namespace octseg {

void NetworkConfig::validate() const {
    if (input_channels < 1) throw ValidationError("NetworkConfig: input_channels < 1");
    if (num_classes < 2) throw ValidationError("NetworkConfig: num_classes < 2");
    if (stem_channels < 1) throw ValidationError("NetworkConfig: stem_channels < 1");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw ValidationError("NetworkConfig: kernel_size must be odd and >= 1");
    if (levels < 0) throw ValidationError("NetworkConfig: negative levels");
    if (static_cast<int>(blocks.size()) != levels + 1)
        throw ValidationError(format_string(
            "NetworkConfig: expected %d block specs (one per down level plus bottom), got %zu",
            levels + 1, blocks.size()));
    for (const auto& b : blocks)
        if (b.layers < 1 || b.growth < 1)
            throw ValidationError("NetworkConfig: block layers and growth must be >= 1");
}

ParamGroup& Parameters::add(std::string name, std::vector<int> shape) {
    if (index_.count(name)) throw ValidationError("Parameters: duplicate group " + name);
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    index_[name] = groups_.size();
    groups_.push_back({std::move(name), std::move(shape), std::vector<double>(count, 0.0)});
    return groups_.back();
}

ParamGroup& Parameters::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("Parameters: no group " + name);
    return groups_[it->second];
}

const ParamGroup& Parameters::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("Parameters: no group " + name);
    return groups_[it->second];
}

bool Parameters::has(const std::string& name) const { return index_.count(name) != 0; }

std::size_t Parameters::total_size() const {
    std::size_t n = 0;
    for (const auto& g : groups_) n += g.size();
    return n;
}

bool Parameters::all_finite() const {
    for (const auto& g : groups_)
        for (double v : g.values)
            if (!std::isfinite(v)) return false;
    return true;
}

Parameters Parameters::zeros_like() const {
    Parameters out;
    for (const auto& g : groups_) out.add(g.name, g.shape);
    return out;
}

// ---------------------------------------------------------------------------
// Graph construction

int DenseFcn::add_conv(const std::string& pname, std::vector<int> inputs, int out_ch,
                       int ksize, bool act) {
    Node n;
    n.kind = Node::Kind::conv;
    n.inputs = std::move(inputs);
    n.in_channels = total_channels(n.inputs);
    n.channels = out_ch;
    n.ksize = ksize;
    n.act = act;
    n.pname = pname;
    n.level = nodes_[n.inputs.front()].level;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int DenseFcn::add_pool(std::vector<int> inputs) {
    Node n;
    n.kind = Node::Kind::pool;
    n.channels = total_channels(inputs);
    n.level = nodes_[inputs.front()].level + 1;
    n.inputs = std::move(inputs);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int DenseFcn::add_upsample(std::vector<int> inputs) {
    Node n;
    n.kind = Node::Kind::upsample;
    n.channels = total_channels(inputs);
    n.level = nodes_[inputs.front()].level - 1;
    n.inputs = std::move(inputs);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int DenseFcn::total_channels(const std::vector<int>& nodes) const {
    int ch = 0;
    for (int i : nodes) ch += nodes_[i].channels;
    return ch;
}

DenseFcn::DenseFcn(NetworkConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build();
}

void DenseFcn::build() {
    Node input;
    input.kind = Node::Kind::input;
    input.channels = cfg_.input_channels;
    nodes_.push_back(input);

    auto dense_block = [&](const std::string& name, const std::vector<int>& block_inputs,
                           const DenseBlockSpec& spec) {
        std::vector<int> feed = block_inputs;   // virtual concatenation
        std::vector<int> fresh;
        for (int i = 0; i < spec.layers; ++i) {
            int o = add_conv(name + ".layer" + std::to_string(i), feed, spec.growth,
                             cfg_.kernel_size, true);
            feed.push_back(o);
            fresh.push_back(o);
        }
        return std::pair{feed, fresh};
    };

    int stem = add_conv("stem", {0}, cfg_.stem_channels, cfg_.kernel_size, true);
    std::vector<int> cur{stem};
    std::vector<std::vector<int>> skips;

    for (int l = 0; l < cfg_.levels; ++l) {
        auto [full, fresh] = dense_block("down" + std::to_string(l), cur, cfg_.blocks[l]);
        block_concat_channels_.push_back(total_channels(full));
        skips.push_back(full);
        int td = add_conv("down" + std::to_string(l) + ".td", full, total_channels(full), 1,
                          true);
        cur = {add_pool({td})};
    }

    auto [bottom_full, bottom_fresh] = dense_block("bottom", cur, cfg_.blocks[cfg_.levels]);
    block_concat_channels_.push_back(total_channels(bottom_full));
    // Only the block's fresh features travel up; skips re-enter via concat.
    cur = bottom_fresh;

    for (int l = cfg_.levels - 1; l >= 0; --l) {
        int ups = add_upsample(cur);
        int tu = add_conv("up" + std::to_string(l) + ".tu", {ups}, total_channels({ups}),
                          cfg_.kernel_size, true);
        std::vector<int> cat{tu};
        cat.insert(cat.end(), skips[l].begin(), skips[l].end());
        auto [full, fresh] = dense_block("up" + std::to_string(l), cat, cfg_.blocks[l]);
        (void)full;
        cur = fresh;
    }

    head_node_ = add_conv("head", cur, cfg_.num_classes, 1, false);
}

int DenseFcn::block_concat_channels(int level) const {
    if (level < 0 || level >= static_cast<int>(block_concat_channels_.size()))
        throw ValidationError("block_concat_channels: level out of range");
    return block_concat_channels_[level];
}

std::vector<DenseFcn::LayerInfo> DenseFcn::conv_layers() const {
    std::vector<LayerInfo> out;
    for (const auto& n : nodes_)
        if (n.kind == Node::Kind::conv)
            out.push_back({n.pname, n.in_channels, n.channels, n.ksize});
    return out;
}

Parameters DenseFcn::init_parameters(std::uint64_t seed) const {
    Parameters params;
    std::mt19937_64 rng(seed);
    for (const auto& n : nodes_) {
        if (n.kind != Node::Kind::conv) continue;
        auto& w = params.add(n.pname + ".w", {n.channels, n.in_channels, n.ksize, n.ksize});
        double fan_in = static_cast<double>(n.in_channels) * n.ksize * n.ksize;
        double fan_out = static_cast<double>(n.channels) * n.ksize * n.ksize;
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (fan_in + fan_out)));
        for (double& v : w.values) v = dist(rng);
        params.add(n.pname + ".b", {n.channels});
        if (cfg_.channel_affine && n.act) {
            auto& gamma = params.add(n.pname + ".gamma", {n.channels});
            std::fill(gamma.values.begin(), gamma.values.end(), 1.0);
            params.add(n.pname + ".beta", {n.channels});
        }
    }
    return params;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

// Overlap of a convolution tap (dy,dx) with the image; the shared geometry of
// forward, gradient, and weight-gradient passes.
struct TapSpan {
    int y0, y1;   // output rows
    int x0, len;  // output column start / run length
    int dy, dx;
};

inline TapSpan tap_span(int h, int w, int ky, int kx, int off) {
    TapSpan t;
    t.dy = ky - off;
    t.dx = kx - off;
    t.y0 = std::max(0, -t.dy);
    t.y1 = h - std::max(0, t.dy);
    t.x0 = std::max(0, -t.dx);
    int x1 = w - std::max(0, t.dx);
    t.len = std::max(0, x1 - t.x0);
    return t;
}

ImageF pad_bottom_right(const ImageF& img, int target_h, int target_w) {
    if (img.rows() == target_h && img.cols() == target_w) return img;
    ImageF out(target_h, target_w);
    for (int r = 0; r < target_h; ++r) {
        // symmetric (edge-inclusive) reflection
        int sr = r < img.rows() ? r : 2 * img.rows() - 1 - r;
        for (int c = 0; c < target_w; ++c) {
            int sc = c < img.cols() ? c : 2 * img.cols() - 1 - c;
            out(r, c) = img(sr, sc);
        }
    }
    return out;
}

inline int round_up(int v, int m) { return (v + m - 1) / m * m; }

}  // namespace

FeatureMap DenseFcn::forward(const ImageF& image, const Parameters& params,
                             Trace& trace) const {
    const auto& ops = kernels::active();
    if (image.rows() < 1 || image.cols() < 1)
        throw ValidationError("DenseFcn::forward: empty image");

    trace.orig_h = image.rows();
    trace.orig_w = image.cols();
    const int stride = cfg_.stride();
    const int ph = round_up(image.rows(), stride);
    const int pw = round_up(image.cols(), stride);
    if (ph > 2 * image.rows() || pw > 2 * image.cols())
        throw ValidationError("DenseFcn::forward: image too small for downsampling depth");

    trace.values.assign(nodes_.size(), FeatureMap());
    trace.preact.assign(nodes_.size(), FeatureMap());

    ImageF padded = pad_bottom_right(image, ph, pw);
    FeatureMap& in_map = trace.values[0];
    in_map = FeatureMap(cfg_.input_channels, ph, pw);
    // single-channel input is the common case; replicate otherwise
    for (int c = 0; c < cfg_.input_channels; ++c)
        std::copy(padded.data().begin(), padded.data().end(), in_map.plane(c));

    for (std::size_t i = 1; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        const int h = ph >> n.level;
        const int w = pw >> n.level;
        FeatureMap& out = trace.values[i];
        switch (n.kind) {
            case Node::Kind::conv: {
                out = FeatureMap(n.channels, h, w);
                const auto& wg = params.at(n.pname + ".w");
                const auto& bg = params.at(n.pname + ".b");
                const int k = n.ksize;
                const int off = k / 2;
                for (int o = 0; o < n.channels; ++o) {
                    double* plane = out.plane(o);
                    std::fill(plane, plane + static_cast<std::size_t>(h) * w, bg.values[o]);
                }
                int g = 0;  // global input channel
                for (int src : n.inputs) {
                    const FeatureMap& vin = trace.values[src];
                    for (int p = 0; p < vin.channels(); ++p, ++g) {
                        const double* iplane = vin.plane(p);
                        for (int o = 0; o < n.channels; ++o) {
                            const double* wrow =
                                wg.values.data() +
                                (static_cast<std::size_t>(o) * n.in_channels + g) * k * k;
                            double* oplane = out.plane(o);
                            for (int ky = 0; ky < k; ++ky)
                                for (int kx = 0; kx < k; ++kx) {
                                    double wv = wrow[ky * k + kx];
                                    if (wv == 0.0) continue;
                                    TapSpan t = tap_span(h, w, ky, kx, off);
                                    for (int y = t.y0; y < t.y1; ++y)
                                        ops.axpy(wv,
                                                 iplane + static_cast<std::size_t>(y + t.dy) * w +
                                                     t.x0 + t.dx,
                                                 oplane + static_cast<std::size_t>(y) * w + t.x0,
                                                 t.len);
                                }
                        }
                    }
                }
                const bool affine = cfg_.channel_affine && n.act;
                if (affine) {
                    trace.preact[i] = out;  // conv output, pre affine/activation
                    const auto& gamma = params.at(n.pname + ".gamma");
                    const auto& beta = params.at(n.pname + ".beta");
                    for (int o = 0; o < n.channels; ++o) {
                        double* plane = out.plane(o);
                        double gm = gamma.values[o], bt = beta.values[o];
                        for (std::size_t j = 0; j < static_cast<std::size_t>(h) * w; ++j)
                            plane[j] = gm * plane[j] + bt;
                    }
                }
                if (n.act && cfg_.activation == Activation::tanh_act)
                    for (double& v : out.data()) v = std::tanh(v);
                break;
            }
            case Node::Kind::pool: {
                out = FeatureMap(n.channels, h, w);
                int oc = 0;
                for (int src : n.inputs) {
                    const FeatureMap& vin = trace.values[src];
                    for (int p = 0; p < vin.channels(); ++p, ++oc) {
                        for (int y = 0; y < h; ++y) {
                            const double* r0 = vin.row(p, 2 * y);
                            const double* r1 = vin.row(p, 2 * y + 1);
                            double* orow = out.row(oc, y);
                            for (int x = 0; x < w; ++x)
                                orow[x] =
                                    0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
                        }
                    }
                }
                break;
            }
            case Node::Kind::upsample: {
                out = FeatureMap(n.channels, h, w);
                int oc = 0;
                for (int src : n.inputs) {
                    const FeatureMap& vin = trace.values[src];
                    for (int p = 0; p < vin.channels(); ++p, ++oc) {
                        for (int y = 0; y < h; ++y) {
                            const double* irow = vin.row(p, y / 2);
                            double* orow = out.row(oc, y);
                            for (int x = 0; x < w; ++x) orow[x] = irow[x / 2];
                        }
                    }
                }
                break;
            }
            case Node::Kind::input:
                break;
        }
    }

    FeatureMap probs = softmax_channels(trace.values[head_node_]);
    if (ph == trace.orig_h && pw == trace.orig_w) return probs;
    FeatureMap cropped(cfg_.num_classes, trace.orig_h, trace.orig_w);
    for (int c = 0; c < cfg_.num_classes; ++c)
        for (int y = 0; y < trace.orig_h; ++y)
            std::copy(probs.row(c, y), probs.row(c, y) + trace.orig_w, cropped.row(c, y));
    return cropped;
}

FeatureMap DenseFcn::forward(const ImageF& image, const Parameters& params) const {
    Trace trace;
    return forward(image, params, trace);
}

void DenseFcn::backward(const Trace& trace, const FeatureMap& dlogits,
                        const Parameters& params, Parameters& grads) const {
    const auto& ops = kernels::active();
    if (trace.values.size() != nodes_.size())
        throw ValidationError("DenseFcn::backward: stale trace");
    if (dlogits.height() != trace.orig_h || dlogits.width() != trace.orig_w ||
        dlogits.channels() != cfg_.num_classes)
        throw ValidationError("DenseFcn::backward: dlogits shape mismatch");

    const int ph = trace.values[0].height();
    const int pw = trace.values[0].width();

    std::vector<FeatureMap> dvals(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        dvals[i] = FeatureMap(nodes_[i].channels, ph >> nodes_[i].level, pw >> nodes_[i].level);

    // Embed the cropped logit gradient; padded border logits see zero grad.
    FeatureMap& dhead = dvals[head_node_];
    for (int c = 0; c < cfg_.num_classes; ++c)
        for (int y = 0; y < trace.orig_h; ++y)
            std::copy(dlogits.row(c, y), dlogits.row(c, y) + trace.orig_w, dhead.row(c, y));

    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 1; --i) {
        const Node& n = nodes_[i];
        const int h = ph >> n.level;
        const int w = pw >> n.level;
        FeatureMap& dout = dvals[i];
        switch (n.kind) {
            case Node::Kind::conv: {
                const bool affine = cfg_.channel_affine && n.act;
                // Through the activation: dz = dout * act'(z).
                if (n.act && cfg_.activation == Activation::tanh_act) {
                    const FeatureMap& a = trace.values[i];
                    for (std::size_t j = 0; j < dout.data().size(); ++j)
                        dout.data()[j] *= 1.0 - a.data()[j] * a.data()[j];
                }
                if (affine) {
                    const auto& gamma = params.at(n.pname + ".gamma");
                    auto& dgamma = grads.at(n.pname + ".gamma");
                    auto& dbeta = grads.at(n.pname + ".beta");
                    const FeatureMap& z = trace.preact[i];
                    for (int o = 0; o < n.channels; ++o) {
                        double* dp = dout.plane(o);
                        const double* zp = z.plane(o);
                        std::size_t count = static_cast<std::size_t>(h) * w;
                        dbeta.values[o] += ops.sum(dp, count);
                        dgamma.values[o] += ops.dot(dp, zp, count);
                        ops.scal(gamma.values[o], dp, count);
                    }
                }
                const auto& wg = params.at(n.pname + ".w");
                auto& dw = grads.at(n.pname + ".w");
                auto& db = grads.at(n.pname + ".b");
                const int k = n.ksize;
                const int off = k / 2;
                for (int o = 0; o < n.channels; ++o)
                    db.values[o] += ops.sum(dout.plane(o), static_cast<std::size_t>(h) * w);
                int g = 0;
                for (int src : n.inputs) {
                    const FeatureMap& vin = trace.values[src];
                    FeatureMap& dsrc = dvals[src];
                    for (int p = 0; p < vin.channels(); ++p, ++g) {
                        const double* iplane = vin.plane(p);
                        double* diplane = dsrc.plane(p);
                        for (int o = 0; o < n.channels; ++o) {
                            const double* dzplane = dout.plane(o);
                            const std::size_t wbase =
                                (static_cast<std::size_t>(o) * n.in_channels + g) * k * k;
                            for (int ky = 0; ky < k; ++ky)
                                for (int kx = 0; kx < k; ++kx) {
                                    TapSpan t = tap_span(h, w, ky, kx, off);
                                    double wsum = 0.0;
                                    double wv = wg.values[wbase + ky * k + kx];
                                    for (int y = t.y0; y < t.y1; ++y) {
                                        const double* in_seg =
                                            iplane +
                                            static_cast<std::size_t>(y + t.dy) * w + t.x0 + t.dx;
                                        const double* dz_seg =
                                            dzplane + static_cast<std::size_t>(y) * w + t.x0;
                                        wsum += ops.dot(in_seg, dz_seg, t.len);
                                        ops.axpy(wv, dz_seg,
                                                 diplane +
                                                     static_cast<std::size_t>(y + t.dy) * w +
                                                     t.x0 + t.dx,
                                                 t.len);
                                    }
                                    dw.values[wbase + ky * k + kx] += wsum;
                                }
                        }
                    }
                }
                break;
            }
            case Node::Kind::pool: {
                int oc = 0;
                for (int src : n.inputs) {
                    FeatureMap& dsrc = dvals[src];
                    for (int p = 0; p < dsrc.channels(); ++p, ++oc) {
                        for (int y = 0; y < h; ++y) {
                            const double* drow = dout.row(oc, y);
                            double* d0 = dsrc.row(p, 2 * y);
                            double* d1 = dsrc.row(p, 2 * y + 1);
                            for (int x = 0; x < w; ++x) {
                                double v = 0.25 * drow[x];
                                d0[2 * x] += v;
                                d0[2 * x + 1] += v;
                                d1[2 * x] += v;
                                d1[2 * x + 1] += v;
                            }
                        }
                    }
                }
                break;
            }
            case Node::Kind::upsample: {
                int oc = 0;
                for (int src : n.inputs) {
                    FeatureMap& dsrc = dvals[src];
                    for (int p = 0; p < dsrc.channels(); ++p, ++oc) {
                        for (int y = 0; y < h; ++y) {
                            const double* drow = dout.row(oc, y);
                            double* srow = dsrc.row(p, y / 2);
                            for (int x = 0; x < w; ++x) srow[x / 2] += drow[x];
                        }
                    }
                }
                break;
            }
            case Node::Kind::input:
                break;
        }
    }
}

// ---------------------------------------------------------------------------
// Probabilities, loss, training

FeatureMap softmax_channels(const FeatureMap& logits) {
    FeatureMap probs(logits.channels(), logits.height(), logits.width());
    const int ch = logits.channels();
    for (int y = 0; y < logits.height(); ++y)
        for (int x = 0; x < logits.width(); ++x) {
            double m = logits.at(0, y, x);
            for (int c = 1; c < ch; ++c) m = std::max(m, logits.at(c, y, x));
            double sum = 0.0;
            for (int c = 0; c < ch; ++c) {
                double e = std::exp(logits.at(c, y, x) - m);
                probs.at(c, y, x) = e;
                sum += e;
            }
            for (int c = 0; c < ch; ++c) probs.at(c, y, x) /= sum;
        }
    return probs;
}

LabelGrid predict_labels(const FeatureMap& probs) {
    LabelGrid labels(probs.height(), probs.width());
    for (int y = 0; y < probs.height(); ++y)
        for (int x = 0; x < probs.width(); ++x) {
            int best = 0;
            double bv = probs.at(0, y, x);
            for (int c = 1; c < probs.channels(); ++c) {
                double v = probs.at(c, y, x);
                if (v > bv) {  // ties keep the smaller class index
                    bv = v;
                    best = c;
                }
            }
            labels(y, x) = static_cast<std::uint8_t>(best);
        }
    return labels;
}

namespace {

struct LossTerms {
    double numerator = 0.0;
    double weight_sum = 0.0;
    FeatureMap dlogits_raw;  // weight * (p - onehot), not yet normalized
};

LossTerms weighted_ce_terms(const FeatureMap& probs, const LabelGrid& labels,
                            const std::array<double, kNumClasses>& weights,
                            const MaskGrid* exclude_mask) {
    if (probs.height() != labels.rows() || probs.width() != labels.cols())
        throw ValidationError("weighted_cross_entropy: probs/labels shape mismatch");
    if (probs.channels() != kNumClasses)
        throw ValidationError("weighted_cross_entropy: expected 6 classes");
    if (exclude_mask && !exclude_mask->empty() &&
        (exclude_mask->rows() != labels.rows() || exclude_mask->cols() != labels.cols()))
        throw ValidationError("weighted_cross_entropy: mask shape mismatch");
    for (double w : weights)
        if (!(w > 0.0)) throw ValidationError("weighted_cross_entropy: weights must be positive");

    LossTerms terms;
    terms.dlogits_raw = FeatureMap(kNumClasses, labels.rows(), labels.cols());
    const bool masked = exclude_mask && !exclude_mask->empty();
    for (int y = 0; y < labels.rows(); ++y)
        for (int x = 0; x < labels.cols(); ++x) {
            if (masked && (*exclude_mask)(y, x)) continue;
            int lbl = labels(y, x);
            if (lbl >= kNumClasses)
                throw ValidationError(format_string("weighted_cross_entropy: label %d", lbl));
            double w = weights[lbl];
            double p = std::max(probs.at(lbl, y, x), 1e-12);
            terms.numerator += w * -std::log(p);
            terms.weight_sum += w;
            for (int c = 0; c < kNumClasses; ++c) {
                double d = probs.at(c, y, x) - (c == lbl ? 1.0 : 0.0);
                terms.dlogits_raw.at(c, y, x) = w * d;
            }
        }
    return terms;
}

}  // namespace

LossResult weighted_cross_entropy(const FeatureMap& probs, const LabelGrid& labels,
                                  const std::array<double, kNumClasses>& weights,
                                  const MaskGrid* exclude_mask) {
    LossTerms terms = weighted_ce_terms(probs, labels, weights, exclude_mask);
    if (terms.weight_sum == 0.0)
        throw ValidationError("weighted_cross_entropy: every pixel masked out");
    LossResult result;
    result.loss = terms.numerator / terms.weight_sum;
    result.weight_sum = terms.weight_sum;
    result.dlogits = std::move(terms.dlogits_raw);
    kernels::active().scal(1.0 / terms.weight_sum, result.dlogits.data().data(),
                           result.dlogits.data().size());
    return result;
}

void TrainingConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("TrainingConfig: learning_rate <= 0");
    if (epochs < 1) throw ValidationError("TrainingConfig: epochs < 1");
    if (batch_size < 1) throw ValidationError("TrainingConfig: batch_size < 1");
    if (!(minority_weight > 0.0)) throw ValidationError("TrainingConfig: minority_weight <= 0");
    for (int c : minority_classes)
        if (c < 0 || c >= kNumClasses)
            throw ValidationError("TrainingConfig: minority class out of range");
}

namespace {

std::array<double, kNumClasses> resolve_class_weights(const std::vector<TrainSample>& dataset,
                                                      const TrainingConfig& tconfig) {
    std::array<double, kNumClasses> weights;
    weights.fill(1.0);
    std::vector<int> minority = tconfig.minority_classes;
    if (minority.empty()) {
        // Default: the two thinnest bands of the training labels.
        std::array<std::size_t, kNumClasses> counts{};
        for (const auto& s : dataset)
            for (std::uint8_t lbl : s.labels->data()) ++counts[lbl];
        std::array<int, kNumClasses> order;
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return counts[a] < counts[b]; });
        minority = {order[0], order[1]};
    }
    for (int c : minority) weights[c] = tconfig.minority_weight;
    return weights;
}

}  // namespace

TrainResult train(const std::vector<TrainSample>& dataset, const TrainingConfig& tconfig,
                  const NetworkConfig& nconfig) {
    tconfig.validate();
    if (dataset.empty()) throw ValidationError("train: empty dataset");
    for (const auto& s : dataset) {
        if (!s.image || !s.labels) throw ValidationError("train: null sample");
        if (s.image->rows() != s.labels->rows() || s.image->cols() != s.labels->cols())
            throw ValidationError("train: image/label shape mismatch");
    }

    DenseFcn net(nconfig);
    TrainResult result;
    result.params = net.init_parameters();
    result.class_weights = resolve_class_weights(dataset, tconfig);

    std::mt19937_64 shuffle_rng(tconfig.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    const auto& ops = kernels::active();
    for (int epoch = 0; epoch < tconfig.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_numerator = 0.0;
        double epoch_weight = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(tconfig.batch_size)) {
            std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(tconfig.batch_size));
            Parameters grads = result.params.zeros_like();
            double batch_numerator = 0.0;
            double batch_weight = 0.0;

            struct Pending {
                DenseFcn::Trace trace;
                FeatureMap dlogits_raw;
            };
            std::vector<Pending> pending;
            pending.reserve(stop - start);
            for (std::size_t idx = start; idx < stop; ++idx) {
                const TrainSample& s = dataset[order[idx]];
                Pending p;
                FeatureMap probs = net.forward(*s.image, result.params, p.trace);
                const MaskGrid* mask = tconfig.zero_region_mask ? s.exclude_mask : nullptr;
                LossTerms terms = weighted_ce_terms(probs, *s.labels, result.class_weights, mask);
                batch_numerator += terms.numerator;
                batch_weight += terms.weight_sum;
                p.dlogits_raw = std::move(terms.dlogits_raw);
                pending.push_back(std::move(p));
            }
            if (batch_weight == 0.0)
                throw ValidationError("train: batch with every pixel masked out");
            double batch_loss = batch_numerator / batch_weight;
            if (!std::isfinite(batch_loss))
                throw NumericalError(format_string(
                    "train: loss diverged (non-finite) at epoch %d; lower the learning rate",
                    epoch));
            // Normalize the whole batch by its total weight.
            for (std::size_t j = 0; j < pending.size(); ++j) {
                ops.scal(1.0 / batch_weight, pending[j].dlogits_raw.data().data(),
                         pending[j].dlogits_raw.data().size());
                net.backward(pending[j].trace, pending[j].dlogits_raw, result.params, grads);
            }
            for (std::size_t gi = 0; gi < grads.groups().size(); ++gi) {
                auto& pg = result.params.groups()[gi];
                const auto& gg = grads.groups()[gi];
                ops.axpy(-tconfig.learning_rate, gg.values.data(), pg.values.data(),
                         pg.values.size());
            }
            if (!result.params.all_finite())
                throw NumericalError(format_string(
                    "train: parameters became non-finite at epoch %d; lower the learning rate",
                    epoch));
            epoch_numerator += batch_numerator;
            epoch_weight += batch_weight;
        }
        result.loss_history.push_back(epoch_numerator / epoch_weight);
    }
    return result;
}

Parameters analytic_gradients(const DenseFcn& net, const Parameters& params,
                              const ImageF& image, const LabelGrid& labels,
                              const std::array<double, kNumClasses>& weights,
                              const MaskGrid* exclude_mask) {
    DenseFcn::Trace trace;
    FeatureMap probs = net.forward(image, params, trace);
    LossResult loss = weighted_cross_entropy(probs, labels, weights, exclude_mask);
    Parameters grads = params.zeros_like();
    net.backward(trace, loss.dlogits, params, grads);
    return grads;
}

GradCheckReport compare_to_fd(const DenseFcn& net, const Parameters& params,
                              const Parameters& grads, const ImageF& image,
                              const LabelGrid& labels,
                              const std::array<double, kNumClasses>& weights,
                              const MaskGrid* exclude_mask, double step) {
    Parameters probe = params;
    auto loss_at = [&]() {
        FeatureMap probs = net.forward(image, probe);
        return weighted_cross_entropy(probs, labels, weights, exclude_mask).loss;
    };

    GradCheckReport report;
    for (std::size_t gi = 0; gi < probe.groups().size(); ++gi) {
        auto& group = probe.groups()[gi];
        const auto& ggrad = grads.groups()[gi];
        GradCheckReport::GroupResult gr{group.name, 0.0};
        for (std::size_t j = 0; j < group.values.size(); ++j) {
            double saved = group.values[j];
            group.values[j] = saved + step;
            double lp = loss_at();
            group.values[j] = saved - step;
            double lm = loss_at();
            group.values[j] = saved;
            double numeric = (lp - lm) / (2.0 * step);
            double analytic = ggrad.values[j];
            double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), 1e-12});
            gr.max_rel_err = std::max(gr.max_rel_err, rel);
        }
        if (gr.max_rel_err > report.max_rel_err) {
            report.max_rel_err = gr.max_rel_err;
            report.worst_group = gr.name;
        }
        report.groups.push_back(std::move(gr));
    }
    return report;
}

GradCheckReport gradient_check(const NetworkConfig& nconfig, int height, int width,
                               std::uint64_t seed, double step) {
    DenseFcn net(nconfig);
    Parameters params = net.init_parameters(seed);
    if (params.total_size() > 8192)
        throw ValidationError(format_string(
            "gradient_check: config has %zu parameters; keep the probe under ~5k",
            params.total_size()));

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    ImageF image(height, width);
    for (double& v : image.data()) v = unif(rng);
    LabelGrid labels(height, width);
    std::uniform_int_distribution<int> lbl(0, nconfig.num_classes - 1);
    for (auto& v : labels.data()) v = static_cast<std::uint8_t>(lbl(rng));

    std::array<double, kNumClasses> weights;
    weights.fill(1.0);
    Parameters grads = analytic_gradients(net, params, image, labels, weights, nullptr);
    return compare_to_fd(net, params, grads, image, labels, weights, nullptr, step);
}

}  // namespace octseg
