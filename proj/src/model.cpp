#include "udareg/model.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>

#include "udareg/rng.hpp"

namespace udareg {

namespace {

enum : std::uint64_t { kStreamTrunk = 11, kStreamRegression = 12, kStreamRank = 13, kStreamDiscriminator = 14 };

constexpr unsigned bit_of(std::size_t layer_index) { return 1u << layer_index; }

std::optional<std::size_t> adaptable_index(std::string_view name) {
    for (std::size_t k = 0; k < kAdaptableLayers.size(); ++k) {
        if (kAdaptableLayers[k] == name) return k;
    }
    return std::nullopt;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

void require_mode(const ModelAssembly& model, ModelMode mode, std::string_view op) {
    if (model.mode != mode) {
        throw ModeError(fmt::format("{} requires a {} model, got {}", op, to_string(mode), to_string(model.mode)));
    }
}

}  // namespace

std::string_view to_string(ModelMode m) { return m == ModelMode::Single ? "single" : "pairwise"; }

ModelMode parse_model_mode(std::string_view s) {
    if (s == "single") return ModelMode::Single;
    if (s == "pairwise") return ModelMode::Pairwise;
    throw ConfigError(fmt::format("unknown model mode '{}'", s));
}

AdaptLayerSet AdaptLayerSet::from_names(std::span<const std::string> names) {
    AdaptLayerSet set;
    for (const auto& name : names) {
        const auto idx = adaptable_index(name);
        if (!idx) throw ConfigError(fmt::format("unknown adaptation layer '{}'", name));
        set.mask_ |= bit_of(*idx);
    }
    return set;
}

AdaptLayerSet AdaptLayerSet::parse(std::string_view text) {
    text = trim(text);
    AdaptLayerSet set;
    if (text.empty() || text == "none") return set;
    if (text.find(',') != std::string_view::npos) {
        std::vector<std::string> names;
        std::size_t start = 0;
        while (start <= text.size()) {
            const std::size_t pos = std::min(text.find(',', start), text.size());
            names.emplace_back(trim(text.substr(start, pos - start)));
            start = pos + 1;
        }
        return from_names(names);
    }
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = std::min(text.find('+', start), text.size());
        const std::string_view token = trim(text.substr(start, pos - start));
        start = pos + 1;
        if (token == "conv" || token == "conv_proxy") {
            set.mask_ |= bit_of(0);
        } else if (token.size() > 2 && token.substr(0, 2) == "fc") {
            for (char c : token.substr(2)) {
                if (c < '1' || c > '3') throw ConfigError(fmt::format("unknown adaptation layer '{}'", token));
                set.mask_ |= bit_of(static_cast<std::size_t>(c - '0'));
            }
        } else {
            throw ConfigError(fmt::format("unknown adaptation layer '{}'", token));
        }
    }
    return set;
}

bool AdaptLayerSet::contains(std::string_view name) const {
    const auto idx = adaptable_index(name);
    return idx && (mask_ & bit_of(*idx)) != 0;
}

std::vector<std::string> AdaptLayerSet::names() const {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < kAdaptableLayers.size(); ++k) {
        if (mask_ & bit_of(k)) out.emplace_back(kAdaptableLayers[k]);
    }
    return out;
}

std::string AdaptLayerSet::label() const {
    if (empty()) return "none";
    std::string out;
    if (mask_ & bit_of(0)) out = "conv";
    std::string fc;
    for (std::size_t k = 1; k < kAdaptableLayers.size(); ++k) {
        if (mask_ & bit_of(k)) fc += static_cast<char>('0' + k);
    }
    if (!fc.empty()) out += (out.empty() ? "fc" : "+fc") + fc;
    return out;
}

void ModelOptions::validate() const {
    if (feature_dim == 0) throw ConfigError("model feature_dim must be positive");
    if (trunk_width == 0) throw ConfigError("model trunk_width must be positive");
    if (fc_widths.size() != 3 || std::find(fc_widths.begin(), fc_widths.end(), 0u) != fc_widths.end()) {
        throw ConfigError("model fc_widths must list three positive widths (fc1, fc2, fc3)");
    }
    if (discriminator_widths.size() != 2 ||
        std::find(discriminator_widths.begin(), discriminator_widths.end(), 0u) != discriminator_widths.end()) {
        throw ConfigError("model discriminator_widths must list two positive hidden widths");
    }
    if (rank_head && mode != ModelMode::Pairwise) throw ConfigError("a rank head requires the pairwise mode");
}

std::size_t ModelAssembly::layer_width(std::string_view name) const {
    if (name == "conv_proxy") return trunk.spec.output_dim();
    const auto idx = regression.spec.layer_index(name);
    if (!idx) throw ShapeError(fmt::format("model has no layer '{}'", name));
    return regression.spec.layer_widths[*idx];
}

void ModelAssembly::validate() const {
    trunk.spec.validate();
    regression.spec.validate();
    trunk.params.check_shape(trunk.spec);
    regression.params.check_shape(regression.spec);
    const std::size_t expected_input = feature_dim * (mode == ModelMode::Pairwise ? 2 : 1);
    if (trunk.spec.input_dim != expected_input) {
        throw ShapeError(fmt::format("trunk input is {}, expected {} for a {} model", trunk.spec.input_dim, expected_input,
                                     to_string(mode)));
    }
    if (trunk.spec.layer_names.back() != "conv_proxy") throw ShapeError("trunk must end in a layer named conv_proxy");
    if (regression.spec.input_dim != trunk.spec.output_dim()) throw ShapeError("regression input does not match trunk output");
    if (regression.spec.output_dim() != 1) throw ShapeError("regression module must have a scalar output");
    for (std::string_view name : {"fc1", "fc2", "fc3"}) {
        if (!regression.spec.layer_index(name)) throw ShapeError(fmt::format("regression module lacks layer '{}'", name));
    }
    if (rank_head) {
        if (mode != ModelMode::Pairwise) throw ShapeError("rank head on a single-input model");
        rank_head->spec.validate();
        rank_head->params.check_shape(rank_head->spec);
        if (rank_head->spec.input_dim != layer_width("fc3") || rank_head->spec.output_dim() != 1) {
            throw ShapeError("rank head must map fc3 to one unit");
        }
    }
    if (discriminator) {
        discriminator->spec.validate();
        discriminator->params.check_shape(discriminator->spec);
        std::size_t width = 0;
        for (const auto& name : adapt_layers.names()) width += layer_width(name);
        if (discriminator->spec.input_dim != width || discriminator->spec.output_dim() != 1) {
            throw ShapeError("discriminator input does not match the adapted layers");
        }
    }
}

ModelAssembly build_model(const ModelOptions& options) {
    options.validate();
    ModelAssembly model;
    model.mode = options.mode;
    model.feature_dim = options.feature_dim;
    model.adapt_layers = options.adapt_layers;
    model.seed = options.seed;

    NetworkSpec trunk;
    trunk.input_dim = options.feature_dim * (options.mode == ModelMode::Pairwise ? 2 : 1);
    trunk.layer_widths = {options.trunk_width};
    trunk.activations = {Activation::ReLU};
    trunk.layer_names = {"conv_proxy"};
    auto trunk_rng = make_rng(options.seed, kStreamTrunk);
    model.trunk = make_network(std::move(trunk), trunk_rng);

    NetworkSpec regression;
    regression.input_dim = options.trunk_width;
    regression.layer_widths = options.fc_widths;
    regression.layer_widths.push_back(1);
    regression.activations = {Activation::ReLU, Activation::ReLU, Activation::ReLU, Activation::Identity};
    regression.layer_names = {"fc1", "fc2", "fc3", "out"};
    auto regression_rng = make_rng(options.seed, kStreamRegression);
    model.regression = make_network(std::move(regression), regression_rng);
    model.regression.params.layers.back().bias[0] = options.output_bias;

    if (options.rank_head) {
        NetworkSpec rank;
        rank.input_dim = options.fc_widths.back();
        rank.layer_widths = {1};
        rank.activations = {Activation::Sigmoid};
        rank.layer_names = {"rank"};
        auto rank_rng = make_rng(options.seed, kStreamRank);
        model.rank_head = make_network(std::move(rank), rank_rng);
    }

    if (!options.adapt_layers.empty()) {
        NetworkSpec disc;
        for (const auto& name : options.adapt_layers.names()) disc.input_dim += model.layer_width(name);
        disc.layer_widths = {options.discriminator_widths[0], options.discriminator_widths[1], 1};
        disc.activations = {Activation::ReLU, Activation::ReLU, Activation::Sigmoid};
        disc.layer_names = {"d1", "d2", "domain"};
        auto disc_rng = make_rng(options.seed, kStreamDiscriminator);
        model.discriminator = make_network(std::move(disc), disc_rng);
    }
    return model;
}

Vector pair_input(std::span<const double> a, std::span<const double> b) {
    Vector out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

ModelPass forward_pass(const ModelAssembly& model, std::span<const double> input) {
    ModelPass pass;
    auto trunk = forward(model.trunk, input);
    auto regression = forward(model.regression, trunk.output);
    pass.output = regression.output[0];
    if (model.rank_head) {
        const std::size_t fc3 = *model.regression.spec.layer_index("fc3");
        auto rank = forward(*model.rank_head, regression.tape.activations[fc3]);
        pass.rank_prob = rank.output[0];
        pass.rank = std::move(rank.tape);
    }
    pass.trunk = std::move(trunk.tape);
    pass.regression = std::move(regression.tape);
    return pass;
}

std::vector<Vector> ModelPass::adapt_activations(const AdaptLayerSet& layers) const {
    std::vector<Vector> out;
    for (const auto& name : layers.names()) {
        if (name == "conv_proxy") {
            out.push_back(trunk.activations.back());
        } else {
            const std::size_t k = static_cast<std::size_t>(name.back() - '1');
            out.push_back(regression.activations[k]);
        }
    }
    return out;
}

double predict_single(const ModelAssembly& model, std::span<const double> features) {
    require_mode(model, ModelMode::Single, "predict_single");
    const double raw = forward_pass(model, features).output;
    return model.normalization ? model.normalization->invert(raw) : raw;
}

PairPrediction predict_pair(const ModelAssembly& model, std::span<const double> a, std::span<const double> b) {
    require_mode(model, ModelMode::Pairwise, "predict_pair");
    const auto pass = forward_pass(model, pair_input(a, b));
    const double diff = model.normalization ? model.normalization->invert_diff(pass.output) : pass.output;
    return {diff, pass.rank_prob};
}

std::vector<Vector> adaptation_features(const ModelAssembly& model, std::span<const double> input,
                                        const AdaptLayerSet& layers) {
    return forward_pass(model, input).adapt_activations(layers);
}

ModelGrads ModelGrads::zeros(const ModelAssembly& model) {
    ModelGrads g;
    g.trunk = Parameters::zeros(model.trunk.spec);
    g.regression = Parameters::zeros(model.regression.spec);
    if (model.rank_head) g.rank_head = Parameters::zeros(model.rank_head->spec);
    return g;
}

void backward_pass(const ModelAssembly& model, const ModelPass& pass, double output_grad, double rank_grad,
                   const AdaptLayerSet& layers, std::span<const Vector> layer_grads, ModelGrads& grads) {
    const auto names = layers.names();
    if (layer_grads.size() != names.size() && !layer_grads.empty()) {
        throw ShapeError("backward_pass: one gradient per adapted layer required");
    }

    std::vector<Vector> regression_extra(model.regression.spec.num_layers());
    Vector trunk_extra;
    for (std::size_t k = 0; k < layer_grads.size(); ++k) {
        if (layer_grads[k].empty()) continue;
        if (names[k] == "conv_proxy") {
            trunk_extra = layer_grads[k];
        } else {
            regression_extra[static_cast<std::size_t>(names[k].back() - '1')] = layer_grads[k];
        }
    }

    if (model.rank_head && pass.rank && rank_grad != 0.0) {
        const Vector seed{rank_grad};
        auto rank = backward(*model.rank_head, *pass.rank, seed);
        grads.rank_head.add_scaled(rank.param_grads, 1.0);
        const std::size_t fc3 = *model.regression.spec.layer_index("fc3");
        Vector& slot = regression_extra[fc3];
        if (slot.empty()) slot.assign(rank.input_grad.size(), 0.0);
        for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += rank.input_grad[i];
    }

    const Vector out_seed{output_grad};
    auto regression = backward(model.regression, pass.regression, out_seed, regression_extra);
    grads.regression.add_scaled(regression.param_grads, 1.0);

    Vector trunk_grad = std::move(regression.input_grad);
    if (!trunk_extra.empty()) {
        for (std::size_t i = 0; i < trunk_grad.size(); ++i) trunk_grad[i] += trunk_extra[i];
    }
    auto trunk = backward(model.trunk, pass.trunk, trunk_grad);
    grads.trunk.add_scaled(trunk.param_grads, 1.0);
}

}  // namespace udareg
