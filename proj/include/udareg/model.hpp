#pragma once

// Regression architectures assembled from dense networks:
//
//   input --trunk--> conv_proxy --regression--> fc1 -> fc2 -> fc3 -> out
//                                                                 \-> rank (Pairwise)
//   [selected adaptation layers] --(gradient reversal)--> discriminator
//
// In Pairwise mode the trunk input is the concatenation of two feature
// vectors; "out" is then the signed difference f1(A, B) and "rank" the
// sigmoid probability that A is older than B.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "udareg/data.hpp"
#include "udareg/diffcore.hpp"

namespace udareg {

enum class ModelMode { Single, Pairwise };

std::string_view to_string(ModelMode m);
ModelMode parse_model_mode(std::string_view s);

inline constexpr std::array<std::string_view, 4> kAdaptableLayers = {"conv_proxy", "fc1", "fc2", "fc3"};

// Subset of the adaptable layers, always iterated in declaration order.
class AdaptLayerSet {
public:
    AdaptLayerSet() = default;
    // Throws ConfigError on an unknown name.
    static AdaptLayerSet from_names(std::span<const std::string> names);
    // Accepts "none", a comma list of layer names, or the short labels
    // "conv", "fc1", "fc123", "conv+fc1", "conv+fc123".
    static AdaptLayerSet parse(std::string_view text);

    bool empty() const { return mask_ == 0; }
    bool contains(std::string_view name) const;
    std::vector<std::string> names() const;
    // Short label as used in comparison tables, e.g. "conv+fc123" or "none".
    std::string label() const;

    bool operator==(const AdaptLayerSet&) const = default;

private:
    unsigned mask_ = 0;
};

struct ModelOptions {
    std::size_t feature_dim = 16;
    ModelMode mode = ModelMode::Single;
    bool rank_head = false;
    std::size_t trunk_width = 64;
    std::vector<std::size_t> fc_widths = {32, 16, 8};
    std::vector<std::size_t> discriminator_widths = {32, 16};
    AdaptLayerSet adapt_layers;
    double output_bias = 0.0;  // initial bias of the regression output unit
    std::uint64_t seed = 1;

    void validate() const;
};

struct ModelAssembly {
    ModelMode mode = ModelMode::Single;
    std::size_t feature_dim = 0;
    Network trunk;
    Network regression;
    std::optional<Network> rank_head;
    std::optional<Network> discriminator;  // present iff adapt_layers is nonempty
    AdaptLayerSet adapt_layers;
    std::optional<NormalizationMap> normalization;
    std::uint64_t seed = 0;

    std::size_t input_dim() const { return trunk.spec.input_dim; }
    // Width of the named adaptable layer.
    std::size_t layer_width(std::string_view name) const;
    // Throws ShapeError if the networks do not chain together.
    void validate() const;

    bool operator==(const ModelAssembly&) const = default;
};

ModelAssembly build_model(const ModelOptions& options);

// Concatenated pair input [a, b].
Vector pair_input(std::span<const double> a, std::span<const double> b);

// Single mode; returns years (de-normalized when a map is attached).
double predict_single(const ModelAssembly& model, std::span<const double> features);

struct PairPrediction {
    double age_diff = 0.0;  // years
    double rank = 0.5;      // P(first older); 0.5 when there is no rank head
};

PairPrediction predict_pair(const ModelAssembly& model, std::span<const double> a, std::span<const double> b);

// Activations at the requested layers, in declaration order. input is the
// trunk input (features, or pair_input(a, b) in Pairwise mode).
std::vector<Vector> adaptation_features(const ModelAssembly& model, std::span<const double> input,
                                        const AdaptLayerSet& layers);

// Training-time forward record of trunk, regression and rank head.
struct ModelPass {
    Tape trunk;
    Tape regression;
    std::optional<Tape> rank;
    double output = 0.0;  // raw regression output (normalized units if normalizing)
    double rank_prob = 0.5;

    const Vector& trunk_features() const { return trunk.activations.back(); }
    // Activations of the model's adapt_layers, in order.
    std::vector<Vector> adapt_activations(const AdaptLayerSet& layers) const;
};

ModelPass forward_pass(const ModelAssembly& model, std::span<const double> input);

struct ModelGrads {
    Parameters trunk;
    Parameters regression;
    Parameters rank_head;

    static ModelGrads zeros(const ModelAssembly& model);
};

// Accumulates into grads the gradient of a loss whose partials are
// output_grad (raw regression output), rank_grad (rank probability) and
// layer_grads (one entry per layer in `layers`, matching adapt_activations).
void backward_pass(const ModelAssembly& model, const ModelPass& pass, double output_grad, double rank_grad,
                   const AdaptLayerSet& layers, std::span<const Vector> layer_grads, ModelGrads& grads);

}  // namespace udareg
