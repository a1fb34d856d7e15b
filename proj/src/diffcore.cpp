#include "udareg/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "udareg/rng.hpp"

namespace udareg {

namespace {

double activate(Activation a, double z) {
    switch (a) {
        case Activation::ReLU: return z > 0.0 ? z : 0.0;
        case Activation::Sigmoid:
            if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
            else {
                const double e = std::exp(z);
                return e / (1.0 + e);
            }
        case Activation::Identity: return z;
    }
    return z;
}

// d act / d z, expressed through z and the cached activation.
double activate_grad(Activation a, double z, double out) {
    switch (a) {
        case Activation::ReLU: return z > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: return out * (1.0 - out);
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

bool same_shape(const Parameters& a, const Parameters& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        if (a.layers[l].weights.rows != b.layers[l].weights.rows ||
            a.layers[l].weights.cols != b.layers[l].weights.cols ||
            a.layers[l].bias.size() != b.layers[l].bias.size()) {
            return false;
        }
    }
    return true;
}

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "identity") return Activation::Identity;
    throw ShapeError(fmt::format("unknown activation '{}'", name));
}

void NetworkSpec::validate() const {
    if (input_dim == 0) throw ShapeError("network input_dim must be positive");
    if (layer_widths.empty()) throw ShapeError("network needs at least one layer");
    if (activations.size() != layer_widths.size() || layer_names.size() != layer_widths.size()) {
        throw ShapeError(fmt::format("network spec lengths disagree: {} widths, {} activations, {} names",
                                     layer_widths.size(), activations.size(), layer_names.size()));
    }
    std::set<std::string_view> seen;
    for (std::size_t l = 0; l < layer_widths.size(); ++l) {
        if (layer_widths[l] == 0) throw ShapeError(fmt::format("layer '{}' has zero width", layer_names[l]));
        if (!seen.insert(layer_names[l]).second) {
            throw ShapeError(fmt::format("duplicate layer name '{}'", layer_names[l]));
        }
    }
}

std::optional<std::size_t> NetworkSpec::layer_index(std::string_view name) const {
    for (std::size_t l = 0; l < layer_names.size(); ++l) {
        if (layer_names[l] == name) return l;
    }
    return std::nullopt;
}

Parameters Parameters::zeros(const NetworkSpec& spec) {
    spec.validate();
    Parameters p;
    p.layers.reserve(spec.num_layers());
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        p.layers.push_back({Matrix(spec.layer_widths[l], spec.layer_input_dim(l)),
                            Vector(spec.layer_widths[l], 0.0)});
    }
    return p;
}

std::size_t Parameters::size() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weights.data.size() + layer.bias.size();
    return n;
}

bool Parameters::all_finite() const {
    for (const auto& layer : layers) {
        for (double w : layer.weights.data) if (!std::isfinite(w)) return false;
        for (double b : layer.bias) if (!std::isfinite(b)) return false;
    }
    return true;
}

void Parameters::check_shape(const NetworkSpec& spec) const {
    if (layers.size() != spec.num_layers()) {
        throw ShapeError(fmt::format("parameters have {} layers, spec has {}", layers.size(), spec.num_layers()));
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& w = layers[l].weights;
        if (w.rows != spec.layer_widths[l] || w.cols != spec.layer_input_dim(l) ||
            w.data.size() != w.rows * w.cols || layers[l].bias.size() != spec.layer_widths[l]) {
            throw ShapeError(fmt::format("layer '{}' parameters do not match spec ({}x{} expected)",
                                         spec.layer_names[l], spec.layer_widths[l], spec.layer_input_dim(l)));
        }
    }
}

void Parameters::add_scaled(const Parameters& other, double scale) {
    if (other.layers.size() != layers.size()) throw ShapeError("add_scaled: layer count mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto& dst = layers[l];
        const auto& src = other.layers[l];
        if (dst.weights.data.size() != src.weights.data.size() || dst.bias.size() != src.bias.size()) {
            throw ShapeError("add_scaled: layer shape mismatch");
        }
        for (std::size_t i = 0; i < dst.weights.data.size(); ++i) dst.weights.data[i] += scale * src.weights.data[i];
        for (std::size_t i = 0; i < dst.bias.size(); ++i) dst.bias[i] += scale * src.bias[i];
    }
}

void Parameters::fill(double value) {
    for (auto& layer : layers) {
        std::fill(layer.weights.data.begin(), layer.weights.data.end(), value);
        std::fill(layer.bias.begin(), layer.bias.end(), value);
    }
}

Vector Parameters::flatten() const {
    Vector flat;
    flat.reserve(size());
    for (const auto& layer : layers) {
        flat.insert(flat.end(), layer.weights.data.begin(), layer.weights.data.end());
        flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
    return flat;
}

void Parameters::assign_flat(std::span<const double> flat) {
    if (flat.size() != size()) throw ShapeError("assign_flat: size mismatch");
    std::size_t k = 0;
    for (auto& layer : layers) {
        for (double& w : layer.weights.data) w = flat[k++];
        for (double& b : layer.bias) b = flat[k++];
    }
}

Parameters init_parameters(const NetworkSpec& spec, std::mt19937_64& rng) {
    Parameters p = Parameters::zeros(spec);
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const double fan_in = static_cast<double>(spec.layer_input_dim(l));
        const double fan_out = static_cast<double>(spec.layer_widths[l]);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& w : p.layers[l].weights.data) w = limit * (2.0 * uniform_unit(rng) - 1.0);
    }
    return p;
}

Network make_network(NetworkSpec spec, std::mt19937_64& rng) {
    spec.validate();
    Parameters params = init_parameters(spec, rng);
    return {std::move(spec), std::move(params)};
}

ForwardResult forward(const NetworkSpec& spec, const Parameters& params, std::span<const double> input) {
    if (input.size() != spec.input_dim) {
        throw ShapeError(fmt::format("forward: input has length {}, network expects {}", input.size(), spec.input_dim));
    }
    if (params.layers.size() != spec.num_layers()) throw ShapeError("forward: parameter/spec layer count mismatch");

    ForwardResult result;
    Tape& tape = result.tape;
    tape.input.assign(input.begin(), input.end());
    tape.pre_activations.resize(spec.num_layers());
    tape.activations.resize(spec.num_layers());

    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const Vector& in = l == 0 ? tape.input : tape.activations[l - 1];
        const LayerParams& layer = params.layers[l];
        const std::size_t out_dim = spec.layer_widths[l];
        Vector& z = tape.pre_activations[l];
        Vector& a = tape.activations[l];
        z.assign(out_dim, 0.0);
        a.assign(out_dim, 0.0);
        for (std::size_t o = 0; o < out_dim; ++o) {
            double acc = layer.bias[o];
            const auto w = layer.weights.row(o);
            for (std::size_t i = 0; i < in.size(); ++i) acc += w[i] * in[i];
            z[o] = acc;
            a[o] = activate(spec.activations[l], acc);
        }
    }
    result.output = tape.activations.back();
    return result;
}

BackwardResult backward(const NetworkSpec& spec, const Parameters& params, const Tape& tape,
                        std::span<const double> output_grad, std::span<const Vector> activation_grads) {
    const std::size_t n_layers = spec.num_layers();
    if (tape.activations.size() != n_layers || tape.pre_activations.size() != n_layers) {
        throw ShapeError("backward: tape does not belong to this network");
    }
    if (output_grad.size() != spec.output_dim()) {
        throw ShapeError(fmt::format("backward: output_grad has length {}, network output is {}",
                                     output_grad.size(), spec.output_dim()));
    }
    if (!activation_grads.empty() && activation_grads.size() != n_layers) {
        throw ShapeError("backward: activation_grads must have one entry per layer");
    }

    BackwardResult result;
    result.param_grads = Parameters::zeros(spec);

    Vector grad_a(output_grad.begin(), output_grad.end());
    for (std::size_t l = n_layers; l-- > 0;) {
        if (!activation_grads.empty() && !activation_grads[l].empty()) {
            if (activation_grads[l].size() != spec.layer_widths[l]) {
                throw ShapeError(fmt::format("backward: injected gradient for '{}' has wrong length",
                                             spec.layer_names[l]));
            }
            for (std::size_t o = 0; o < grad_a.size(); ++o) grad_a[o] += activation_grads[l][o];
        }
        const Vector& z = tape.pre_activations[l];
        const Vector& a = tape.activations[l];
        const Vector& in = l == 0 ? tape.input : tape.activations[l - 1];
        const LayerParams& layer = params.layers[l];
        LayerParams& g = result.param_grads.layers[l];

        Vector grad_in(in.size(), 0.0);
        for (std::size_t o = 0; o < grad_a.size(); ++o) {
            const double dz = grad_a[o] * activate_grad(spec.activations[l], z[o], a[o]);
            g.bias[o] = dz;
            if (dz == 0.0) continue;
            auto gw = g.weights.row(o);
            const auto w = layer.weights.row(o);
            for (std::size_t i = 0; i < in.size(); ++i) {
                gw[i] = dz * in[i];
                grad_in[i] += dz * w[i];
            }
        }
        grad_a = std::move(grad_in);
    }
    result.input_grad = std::move(grad_a);
    return result;
}

Vector reverse_gradient(std::span<const double> grad, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("reverse_gradient: lambda must be positive");
    Vector out(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) out[i] = -lambda * grad[i];
    return out;
}

OptimizerState OptimizerState::sgd(double lr) {
    OptimizerState s;
    s.kind = OptimizerKind::SGD;
    s.learning_rate = lr;
    return s;
}

OptimizerState OptimizerState::adam(double lr, double beta1, double beta2, double epsilon) {
    OptimizerState s;
    s.kind = OptimizerKind::Adam;
    s.learning_rate = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    return s;
}

void optimizer_step(OptimizerState& state, Parameters& params, const Parameters& grads) {
    if (!grads.all_finite()) {
        throw DivergenceError(fmt::format("optimizer step {}: non-finite gradient", state.step + 1));
    }
    if (state.kind == OptimizerKind::SGD) {
        if (!same_shape(params, grads)) throw ShapeError("optimizer_step: parameter/gradient shapes differ");
        params.add_scaled(grads, -state.learning_rate);
        ++state.step;
        return;
    }

    if (state.first_moment.layers.empty()) {
        state.first_moment = grads;
        state.first_moment.fill(0.0);
        state.second_moment = state.first_moment;
    }
    if (!same_shape(params, grads) || !same_shape(state.first_moment, grads)) {
        throw ShapeError("optimizer_step: parameter, gradient and moment shapes differ");
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(state.beta1, t);
    const double bias2 = 1.0 - std::pow(state.beta2, t);

    auto update = [&](double& p, double& m, double& v, double g) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        const double m_hat = m / bias1;
        const double v_hat = v / bias2;
        p -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    };

    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto& p = params.layers[l];
        auto& m = state.first_moment.layers[l];
        auto& v = state.second_moment.layers[l];
        const auto& g = grads.layers[l];
        for (std::size_t i = 0; i < p.weights.data.size(); ++i) {
            update(p.weights.data[i], m.weights.data[i], v.weights.data[i], g.weights.data[i]);
        }
        for (std::size_t i = 0; i < p.bias.size(); ++i) update(p.bias[i], m.bias[i], v.bias[i], g.bias[i]);
    }
}

}  // namespace udareg
