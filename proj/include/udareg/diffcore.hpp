#pragma once

// Layered dense feed-forward networks with exact reverse-mode gradients.
//
// A network is a (NetworkSpec, Parameters) pair. forward() records a Tape of
// every layer's input and pre-activation; backward() replays it against an
// output gradient and, optionally, extra gradients injected at intermediate
// layer activations (used for MMD and the discriminator branch, which attach
// to hidden layers rather than the output).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "udareg/types.hpp"

namespace udareg {

enum class Activation { ReLU, Sigmoid, Identity };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct NetworkSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> layer_widths;
    std::vector<Activation> activations;
    std::vector<std::string> layer_names;

    // Throws ShapeError on empty layers, zero widths, length mismatch or
    // duplicate names.
    void validate() const;

    std::size_t num_layers() const { return layer_widths.size(); }
    std::size_t output_dim() const { return layer_widths.back(); }
    std::size_t layer_input_dim(std::size_t layer) const {
        return layer == 0 ? input_dim : layer_widths[layer - 1];
    }
    std::optional<std::size_t> layer_index(std::string_view name) const;

    bool operator==(const NetworkSpec&) const = default;
};

struct LayerParams {
    Matrix weights;  // out x in
    Vector bias;     // out

    bool operator==(const LayerParams&) const = default;
};

struct Parameters {
    std::vector<LayerParams> layers;

    static Parameters zeros(const NetworkSpec& spec);

    std::size_t size() const;
    bool all_finite() const;
    // Throws ShapeError unless every layer matches its NetworkSpec.
    void check_shape(const NetworkSpec& spec) const;

    // this += scale * other
    void add_scaled(const Parameters& other, double scale);
    void fill(double value);

    // Flat views over all scalars, layer by layer, weights before bias.
    Vector flatten() const;
    void assign_flat(std::span<const double> flat);

    bool operator==(const Parameters&) const = default;
};

struct Network {
    NetworkSpec spec;
    Parameters params;

    bool operator==(const Network&) const = default;
};

struct Tape {
    Vector input;
    std::vector<Vector> pre_activations;  // z = W a_prev + b
    std::vector<Vector> activations;      // a = act(z)
};

struct ForwardResult {
    Vector output;
    Tape tape;
};

struct BackwardResult {
    Parameters param_grads;
    Vector input_grad;
};

// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero bias.
Parameters init_parameters(const NetworkSpec& spec, std::mt19937_64& rng);
Network make_network(NetworkSpec spec, std::mt19937_64& rng);

ForwardResult forward(const NetworkSpec& spec, const Parameters& params,
                      std::span<const double> input);
inline ForwardResult forward(const Network& net, std::span<const double> input) {
    return forward(net.spec, net.params, input);
}

// activation_grads, when non-empty, must have one entry per layer; a
// non-empty entry is added to dL/da for that layer before it is propagated.
BackwardResult backward(const NetworkSpec& spec, const Parameters& params, const Tape& tape,
                        std::span<const double> output_grad,
                        std::span<const Vector> activation_grads = {});
inline BackwardResult backward(const Network& net, const Tape& tape,
                               std::span<const double> output_grad,
                               std::span<const Vector> activation_grads = {}) {
    return backward(net.spec, net.params, tape, output_grad, activation_grads);
}

// Backward pass of the gradient-reversal pseudo-layer. Forward is identity.
Vector reverse_gradient(std::span<const double> grad, double lambda);

enum class OptimizerKind { SGD, Adam };

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    Parameters first_moment;
    Parameters second_moment;

    static OptimizerState sgd(double lr);
    static OptimizerState adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                               double epsilon = 1e-8);
};

// Applies one update in place. Throws DivergenceError on non-finite grads.
void optimizer_step(OptimizerState& state, Parameters& params, const Parameters& grads);

}  // namespace udareg
