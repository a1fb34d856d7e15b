#include "udareg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "udareg/losses.hpp"
#include "udareg/rng.hpp"

namespace udareg {

namespace {

enum : std::uint64_t { kStreamMixing = 1, kStreamDelta = 2, kStreamSource = 3, kStreamTarget = 4 };

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

Matrix random_mixing(std::size_t dim, std::mt19937_64& rng) {
    Matrix m(dim, 4);
    for (double& v : m.data) v = standard_normal(rng);
    return m;
}

std::vector<Example> draw_domain(const Matrix& mixing, std::size_t count, double noise_std, Domain domain,
                                 std::mt19937_64& rng) {
    std::vector<Example> out;
    out.reserve(count);
    const char prefix = domain == Domain::Source ? 's' : 't';
    for (std::size_t i = 0; i < count; ++i) {
        Example ex;
        ex.id = fmt::format("{}{:05}", prefix, i);
        ex.domain = domain;
        const double age = 100.0 * uniform_unit(rng);
        const auto phi = synthetic_basis(age);
        ex.features.assign(mixing.rows, 0.0);
        for (std::size_t r = 0; r < mixing.rows; ++r) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 4; ++k) acc += mixing(r, k) * phi[k];
            ex.features[r] = acc + noise_std * standard_normal(rng);
        }
        ex.age = age;
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace

std::string_view to_string(Domain d) { return d == Domain::Source ? "source" : "target"; }

void SyntheticConfig::validate() const {
    if (dim < 2) throw ConfigError(fmt::format("synthetic dim must be >= 2 (got {})", dim));
    if (n_source < 4 || n_target < 4) {
        throw ConfigError(fmt::format("synthetic n_source and n_target must be >= 4 (got {}, {})", n_source, n_target));
    }
    if (!(shift_strength >= 0.0) || !std::isfinite(shift_strength)) throw ConfigError("shift_strength must be >= 0");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("noise_std must be >= 0");
}

std::array<double, 4> synthetic_basis(double age) {
    const double u = age / 100.0;
    return {u, u * u, std::sin(std::numbers::pi * u), std::cos(std::numbers::pi * u)};
}

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    SyntheticDataset ds;
    auto mixing_rng = make_rng(cfg.seed, kStreamMixing);
    auto delta_rng = make_rng(cfg.seed, kStreamDelta);
    ds.source_mixing = random_mixing(cfg.dim, mixing_rng);
    const Matrix delta = random_mixing(cfg.dim, delta_rng);
    ds.target_mixing = ds.source_mixing;
    for (std::size_t k = 0; k < delta.data.size(); ++k) ds.target_mixing.data[k] += cfg.shift_strength * delta.data[k];

    auto source_rng = make_rng(cfg.seed, kStreamSource);
    auto target_rng = make_rng(cfg.seed, kStreamTarget);
    ds.source = draw_domain(ds.source_mixing, cfg.n_source, cfg.noise_std, Domain::Source, source_rng);
    ds.target = draw_domain(ds.target_mixing, cfg.n_target, cfg.noise_std, Domain::Target, target_rng);
    return ds;
}

std::vector<Example> parse_embeddings(std::istream& in, const EmbeddingSchema& schema, const std::string& source_name) {
    std::vector<Example> out;
    std::unordered_set<std::string> ids;
    std::string raw;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    char delim = ',';
    bool have_header = false;

    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;

        if (!have_header) {
            delim = line.find('\t') != std::string_view::npos ? '\t' : ',';
            const auto header = split_fields(line, delim);
            if (header.size() < 4 || header[0] != "id" || header[1] != "domain" || header[2] != "age") {
                throw DataError(source_name, line_no, "header must be id,domain,age,f0,...,f{D-1}");
            }
            dim = header.size() - 3;
            for (std::size_t k = 0; k < dim; ++k) {
                if (header[3 + k] != fmt::format("f{}", k)) {
                    throw DataError(source_name, line_no, fmt::format("expected column f{}, found '{}'", k, header[3 + k]));
                }
            }
            if (schema.dim && *schema.dim != dim) {
                throw DataError(source_name, line_no, fmt::format("header has {} features, expected {}", dim, *schema.dim));
            }
            have_header = true;
            continue;
        }

        const auto fields = split_fields(line, delim);
        if (fields.size() != dim + 3) {
            throw DataError(source_name, line_no,
                            fmt::format("row has {} feature values, header declares {}", fields.size() < 3 ? 0 : fields.size() - 3, dim));
        }
        Example ex;
        ex.id = std::string(fields[0]);
        if (ex.id.empty()) throw DataError(source_name, line_no, "empty id");
        if (fields[1] == "source") ex.domain = Domain::Source;
        else if (fields[1] == "target") ex.domain = Domain::Target;
        else throw DataError(source_name, line_no, fmt::format("unknown domain '{}' (expected source or target)", fields[1]));

        if (fields[2].empty()) {
            if (ex.domain == Domain::Source) throw DataError(source_name, line_no, "source rows must carry an age");
        } else {
            const auto age = parse_double(fields[2]);
            if (!age) throw DataError(source_name, line_no, fmt::format("malformed age '{}'", fields[2]));
            if (*age < kMinAge || *age > kMaxAge) {
                throw DataError(source_name, line_no, fmt::format("age {} outside [{}, {}]", *age, kMinAge, kMaxAge));
            }
            ex.age = *age;
        }
        ex.features.resize(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            const auto v = parse_double(fields[3 + k]);
            if (!v) throw DataError(source_name, line_no, fmt::format("malformed value '{}' in column f{}", fields[3 + k], k));
            ex.features[k] = *v;
        }
        if (!ids.insert(ex.id).second) throw DataError(source_name, line_no, fmt::format("duplicate id '{}'", ex.id));
        out.push_back(std::move(ex));
    }
    if (!have_header) throw DataError(source_name, line_no, "missing header");
    return out;
}

std::vector<Example> load_embeddings(const std::filesystem::path& path, const EmbeddingSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open embedding file '{}'", path.string()));
    return parse_embeddings(in, schema, path.string());
}

void write_embeddings(std::ostream& out, std::span<const Example> examples) {
    const std::size_t dim = examples.empty() ? 0 : examples.front().features.size();
    out << "id,domain,age";
    for (std::size_t k = 0; k < dim; ++k) out << ",f" << k;
    out << '\n';
    for (const auto& ex : examples) {
        if (ex.features.size() != dim) throw ShapeError("write_embeddings: feature dimension is not uniform");
        out << ex.id << ',' << to_string(ex.domain) << ',';
        if (ex.age) out << fmt::format("{}", *ex.age);
        for (double v : ex.features) out << ',' << fmt::format("{}", v);
        out << '\n';
    }
}

void write_embeddings(const std::filesystem::path& path, std::span<const Example> examples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write embedding file '{}'", path.string()));
    write_embeddings(out, examples);
    if (!out) throw DataError(fmt::format("failed writing embedding file '{}'", path.string()));
}

std::vector<PairExample> sample_pairs(std::span<const Example> examples, std::size_t count, std::uint64_t seed,
                                      bool require_labels) {
    std::vector<std::size_t> pools[2];
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (require_labels && !examples[i].age) continue;
        pools[examples[i].domain == Domain::Source ? 0 : 1].push_back(i);
    }
    // (pool, position) for every eligible example.
    std::vector<std::pair<int, std::size_t>> eligible;
    for (int p = 0; p < 2; ++p) {
        if (pools[p].size() < 2) continue;
        for (std::size_t k = 0; k < pools[p].size(); ++k) eligible.emplace_back(p, k);
    }
    if (eligible.empty()) {
        throw DataError("sample_pairs: need at least two eligible examples in one domain");
    }

    auto rng = make_rng(seed, 0x9a1f);
    std::vector<PairExample> out;
    out.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        const auto [pool, pos] = eligible[uniform_index(rng, eligible.size())];
        const auto& members = pools[pool];
        std::size_t partner = uniform_index(rng, members.size() - 1);
        if (partner >= pos) ++partner;

        PairExample pair;
        pair.first = members[pos];
        pair.second = members[partner];
        pair.domain = examples[pair.first].domain;
        const auto& a = examples[pair.first].age;
        const auto& b = examples[pair.second].age;
        if (a && b) {
            pair.diff = *a - *b;
            pair.rank_target = rank_target(*pair.diff);
        }
        out.push_back(pair);
    }
    return out;
}

NormalizationMap NormalizationMap::fit(std::span<const double> labels) {
    if (labels.empty()) throw DataError("normalization: no labels to fit");
    const auto [lo, hi] = std::minmax_element(labels.begin(), labels.end());
    if (!(*hi > *lo)) throw DataError("normalization: degenerate label range (need two distinct labels)");
    return {*lo, *hi};
}

Split split_train_val(std::span<const Example> examples, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    keyed.reserve(examples.size());
    const std::uint64_t salt = mix64(seed);
    for (std::size_t i = 0; i < examples.size(); ++i) {
        keyed.emplace_back(mix64(hash_string(examples[i].id) ^ salt), i);
    }
    std::sort(keyed.begin(), keyed.end(), [&](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first < y.first;
        return examples[x.second].id < examples[y.second].id;
    });
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(examples.size())));
    std::vector<bool> in_train(examples.size(), false);
    for (std::size_t k = 0; k < n_train; ++k) in_train[keyed[k].second] = true;

    Split split;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        (in_train[i] ? split.train : split.val).push_back(examples[i]);
    }
    return split;
}

std::vector<double> labels_of(std::span<const Example> examples) {
    std::vector<double> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        if (!ex.age) throw DataError(fmt::format("example '{}' has no label", ex.id));
        out.push_back(*ex.age);
    }
    return out;
}

}  // namespace udareg
