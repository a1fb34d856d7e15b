#include "udareg/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

namespace udareg {

namespace {

void write_values(std::ostream& out, std::string_view tag, std::span<const double> values) {
    out << tag;
    for (double v : values) out << ' ' << fmt::format("{}", v);
    out << '\n';
}

void write_network(std::ostream& out, std::string_view role, const Network& net) {
    out << "network " << role << ' ' << net.spec.input_dim << ' ' << net.spec.num_layers() << '\n';
    for (std::size_t l = 0; l < net.spec.num_layers(); ++l) {
        out << "layer " << net.spec.layer_names[l] << ' ' << to_string(net.spec.activations[l]) << ' '
            << net.spec.layer_widths[l] << '\n';
        write_values(out, "weights", net.params.layers[l].weights.data);
        write_values(out, "bias", net.params.layers[l].bias);
    }
}

class LineReader {
public:
    LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    // Next non-empty line split on whitespace; the first token must be `tag`.
    std::vector<std::string> expect(std::string_view tag) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            std::istringstream ss(line);
            std::vector<std::string> tokens;
            for (std::string t; ss >> t;) tokens.push_back(std::move(t));
            if (tokens.empty()) continue;
            if (tokens.front() != tag) fail(fmt::format("expected '{}', found '{}'", tag, tokens.front()));
            return tokens;
        }
        fail(fmt::format("unexpected end of file, expected '{}'", tag));
    }

    std::vector<std::string> peek_tag() {
        auto pos = in_.tellg();
        std::string line;
        while (std::getline(in_, line)) {
            std::istringstream ss(line);
            std::vector<std::string> tokens;
            for (std::string t; ss >> t;) tokens.push_back(std::move(t));
            if (tokens.empty()) continue;
            in_.seekg(pos);
            return tokens;
        }
        in_.clear();
        in_.seekg(pos);
        return {};
    }

    [[noreturn]] void fail(const std::string& what) const { throw DataError(source_, line_no_, what); }

    template <class T>
    T number(const std::string& token) const {
        T v{};
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc{} || ptr != token.data() + token.size()) fail(fmt::format("malformed number '{}'", token));
        return v;
    }

private:
    std::istream& in_;
    std::string source_;
    std::size_t line_no_ = 0;
};

Vector read_values(LineReader& reader, std::string_view tag, std::size_t count) {
    const auto tokens = reader.expect(tag);
    if (tokens.size() != count + 1) {
        reader.fail(fmt::format("'{}' has {} values, expected {}", tag, tokens.size() - 1, count));
    }
    Vector out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = reader.number<double>(tokens[i + 1]);
    return out;
}

Network read_network(LineReader& reader, std::string_view role) {
    const auto header = reader.expect("network");
    if (header.size() != 4 || header[1] != role) reader.fail(fmt::format("expected 'network {} <input_dim> <layers>'", role));
    Network net;
    net.spec.input_dim = reader.number<std::size_t>(header[2]);
    const auto n_layers = reader.number<std::size_t>(header[3]);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const auto layer = reader.expect("layer");
        if (layer.size() != 4) reader.fail("expected 'layer <name> <activation> <width>'");
        net.spec.layer_names.push_back(layer[1]);
        try {
            net.spec.activations.push_back(parse_activation(layer[2]));
        } catch (const ShapeError& e) {
            reader.fail(e.what());
        }
        net.spec.layer_widths.push_back(reader.number<std::size_t>(layer[3]));
        const std::size_t in_dim = l == 0 ? net.spec.input_dim : net.spec.layer_widths[l - 1];
        const std::size_t out_dim = net.spec.layer_widths[l];
        LayerParams params;
        params.weights = Matrix(out_dim, in_dim);
        params.weights.data = read_values(reader, "weights", out_dim * in_dim);
        params.bias = read_values(reader, "bias", out_dim);
        net.params.layers.push_back(std::move(params));
    }
    try {
        net.spec.validate();
    } catch (const ShapeError& e) {
        reader.fail(e.what());
    }
    return net;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelAssembly& model) {
    model.validate();
    out << "udareg-checkpoint " << kCheckpointVersion << '\n';
    out << "mode " << to_string(model.mode) << '\n';
    out << "feature_dim " << model.feature_dim << '\n';
    out << "seed " << model.seed << '\n';
    if (model.normalization) {
        out << "normalization " << fmt::format("{} {}", model.normalization->lo, model.normalization->hi) << '\n';
    } else {
        out << "normalization none\n";
    }
    out << "adapt_layers " << model.adapt_layers.label() << '\n';
    write_network(out, "trunk", model.trunk);
    write_network(out, "regression", model.regression);
    if (model.rank_head) write_network(out, "rank_head", *model.rank_head);
    if (model.discriminator) write_network(out, "discriminator", *model.discriminator);
    out << "end\n";
}

void save_checkpoint(const std::filesystem::path& path, const ModelAssembly& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write checkpoint '{}'", path.string()));
    write_checkpoint(out, model);
    if (!out) throw DataError(fmt::format("failed writing checkpoint '{}'", path.string()));
}

ModelAssembly read_checkpoint(std::istream& in, const std::string& source_name) {
    LineReader reader(in, source_name);
    const auto magic = reader.expect("udareg-checkpoint");
    if (magic.size() != 2 || reader.number<int>(magic[1]) != kCheckpointVersion) {
        reader.fail(fmt::format("unsupported checkpoint version (this build reads version {})", kCheckpointVersion));
    }
    ModelAssembly model;
    const auto mode = reader.expect("mode");
    if (mode.size() != 2) reader.fail("expected 'mode <single|pairwise>'");
    try {
        model.mode = parse_model_mode(mode[1]);
    } catch (const ConfigError& e) {
        reader.fail(e.what());
    }
    const auto dim = reader.expect("feature_dim");
    if (dim.size() != 2) reader.fail("expected 'feature_dim <n>'");
    model.feature_dim = reader.number<std::size_t>(dim[1]);
    const auto seed = reader.expect("seed");
    if (seed.size() != 2) reader.fail("expected 'seed <n>'");
    model.seed = reader.number<std::uint64_t>(seed[1]);
    const auto norm = reader.expect("normalization");
    if (norm.size() == 3) {
        model.normalization = NormalizationMap{reader.number<double>(norm[1]), reader.number<double>(norm[2])};
        if (!(model.normalization->hi > model.normalization->lo)) reader.fail("normalization range must satisfy hi > lo");
    } else if (norm.size() != 2 || norm[1] != "none") {
        reader.fail("expected 'normalization <lo> <hi>' or 'normalization none'");
    }
    const auto adapt = reader.expect("adapt_layers");
    if (adapt.size() != 2) reader.fail("expected 'adapt_layers <label>'");
    try {
        model.adapt_layers = AdaptLayerSet::parse(adapt[1]);
    } catch (const ConfigError& e) {
        reader.fail(e.what());
    }

    model.trunk = read_network(reader, "trunk");
    model.regression = read_network(reader, "regression");
    auto next = reader.peek_tag();
    if (next.size() >= 2 && next[0] == "network" && next[1] == "rank_head") {
        model.rank_head = read_network(reader, "rank_head");
        next = reader.peek_tag();
    }
    if (next.size() >= 2 && next[0] == "network" && next[1] == "discriminator") {
        model.discriminator = read_network(reader, "discriminator");
    }
    reader.expect("end");
    try {
        model.validate();
    } catch (const ShapeError& e) {
        reader.fail(e.what());
    }
    return model;
}

ModelAssembly load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open checkpoint '{}'", path.string()));
    return read_checkpoint(in, path.string());
}

}  // namespace udareg
