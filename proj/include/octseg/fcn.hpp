#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "octseg/model.hpp"
#include "octseg/tensor.hpp"

namespace octseg {

struct DenseBlockSpec {
    int layers = 3;
    int growth = 8;
};

enum class Activation { tanh_act, identity };

// Toy-scale fully convolutional net with dense (concatenative) connectivity:
// a U-shaped encoder/decoder whose every level is a dense block, skip
// connections included. Depth and growth are configurable; defaults keep
// experiments desk-sized.
struct NetworkConfig {
    int input_channels = 1;
    int num_classes = kNumClasses;
    int stem_channels = 8;
    int kernel_size = 3;  // odd
    int levels = 2;       // downsample count == upsample count
    // One spec per down level plus the bottom block (levels + 1 entries).
    std::vector<DenseBlockSpec> blocks = {{3, 8}, {3, 8}, {3, 8}};
    Activation activation = Activation::tanh_act;
    bool channel_affine = false;  // learnable per-channel scale/shift after convs
    std::uint64_t seed = 0xc75e6;

    int stride() const { return 1 << levels; }
    void validate() const;
};

struct ParamGroup {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

// Flat, ordered collection of named parameter tensors.
class Parameters {
public:
    ParamGroup& add(std::string name, std::vector<int> shape);
    ParamGroup& at(const std::string& name);
    const ParamGroup& at(const std::string& name) const;
    bool has(const std::string& name) const;

    std::vector<ParamGroup>& groups() { return groups_; }
    const std::vector<ParamGroup>& groups() const { return groups_; }

    std::size_t total_size() const;
    bool all_finite() const;
    // Same names/shapes, zero values (gradient accumulators).
    Parameters zeros_like() const;

private:
    std::vector<ParamGroup> groups_;
    std::map<std::string, std::size_t> index_;
};

class DenseFcn {
public:
    explicit DenseFcn(NetworkConfig cfg);

    const NetworkConfig& config() const { return cfg_; }

    Parameters init_parameters() const { return init_parameters(cfg_.seed); }
    Parameters init_parameters(std::uint64_t seed) const;

    // Concatenated feature width after the dense block at `level`
    // (0..levels-1 = down path, levels = bottom): block input + layers*growth.
    int block_concat_channels(int level) const;

    struct LayerInfo {
        std::string name;
        int in_channels;
        int out_channels;
        int kernel;
    };
    std::vector<LayerInfo> conv_layers() const;

    // Per-pixel class probabilities, same spatial shape as the input. Inputs
    // not divisible by stride() are reflect-padded and cropped on output.
    FeatureMap forward(const ImageF& image, const Parameters& params) const;

    // Forward keeping activations for backprop.
    struct Trace {
        int orig_h = 0, orig_w = 0;
        std::vector<FeatureMap> values;
        std::vector<FeatureMap> preact;  // conv pre-activations; affine mode only
    };
    FeatureMap forward(const ImageF& image, const Parameters& params, Trace& trace) const;

    // Accumulates d(loss)/d(params) into grads given d(loss)/d(logits) at the
    // original (uncropped) shape.
    void backward(const Trace& trace, const FeatureMap& dlogits, const Parameters& params,
                  Parameters& grads) const;

private:
    struct Node {
        enum class Kind { input, conv, pool, upsample } kind;
        std::vector<int> inputs;  // producer nodes; channels concatenate in order
        int channels = 0;
        int in_channels = 0;  // conv only
        int ksize = 0;        // conv only
        bool act = false;     // nonlinearity after conv
        std::string pname;    // conv parameter base name
        int level = 0;        // spatial scale: H >> level
    };

    int add_conv(const std::string& pname, std::vector<int> inputs, int out_ch, int ksize,
                 bool act);
    int add_pool(std::vector<int> inputs);
    int add_upsample(std::vector<int> inputs);
    int total_channels(const std::vector<int>& nodes) const;
    void build();

    NetworkConfig cfg_;
    std::vector<Node> nodes_;
    int head_node_ = -1;
    std::vector<int> block_concat_channels_;  // per level + bottom
};

// Per-pixel argmax; ties resolve to the smaller class index.
LabelGrid predict_labels(const FeatureMap& probs);

FeatureMap softmax_channels(const FeatureMap& logits);

struct LossResult {
    double loss = 0.0;
    FeatureMap dlogits;  // normalized gradient seed d(loss)/d(logits)
    double weight_sum = 0.0;
};

// loss = sum over unmasked pixels of weight[label] * (-ln prob[label]),
// divided by the sum of those weights. mask nonzero = excluded pixel.
// Probabilities are clamped at 1e-12 before the log.
LossResult weighted_cross_entropy(const FeatureMap& probs, const LabelGrid& labels,
                                  const std::array<double, kNumClasses>& weights,
                                  const MaskGrid* exclude_mask = nullptr);

struct TrainSample {
    const ImageF* image = nullptr;
    const LabelGrid* labels = nullptr;
    const MaskGrid* exclude_mask = nullptr;  // optional
};

struct TrainingConfig {
    double learning_rate = 0.05;
    int epochs = 20;
    int batch_size = 1;
    double minority_weight = 10.0;
    // Empty = pick the two classes with the fewest labeled pixels.
    std::vector<int> minority_classes;
    bool zero_region_mask = true;
    std::uint64_t seed = 1234;

    void validate() const;
};

struct TrainResult {
    Parameters params;
    std::vector<double> loss_history;  // per epoch
    std::array<double, kNumClasses> class_weights{};
};

// Plain SGD over shuffled batches; deterministic given (config seeds, data).
// Aborts with NumericalError on divergence (non-finite loss or parameters).
TrainResult train(const std::vector<TrainSample>& dataset, const TrainingConfig& tconfig,
                  const NetworkConfig& nconfig);

// d(loss)/d(params) for one sample (normalized loss).
Parameters analytic_gradients(const DenseFcn& net, const Parameters& params,
                              const ImageF& image, const LabelGrid& labels,
                              const std::array<double, kNumClasses>& weights,
                              const MaskGrid* exclude_mask = nullptr);

struct GradCheckReport {
    struct GroupResult {
        std::string name;
        double max_rel_err = 0.0;
    };
    std::vector<GroupResult> groups;
    double max_rel_err = 0.0;
    std::string worst_group;
};

// Central finite differences (double precision) against supplied analytic
// gradients; rel err = |a-n| / max(|a|,|n|,1e-12).
GradCheckReport compare_to_fd(const DenseFcn& net, const Parameters& params,
                              const Parameters& grads, const ImageF& image,
                              const LabelGrid& labels,
                              const std::array<double, kNumClasses>& weights,
                              const MaskGrid* exclude_mask = nullptr, double step = 1e-4);

// End-to-end check on a random probe; rejects configs above ~5k parameters.
GradCheckReport gradient_check(const NetworkConfig& nconfig, int height, int width,
                               std::uint64_t seed, double step = 1e-4);

}  // namespace octseg
