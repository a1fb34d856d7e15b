#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "udareg/types.hpp"

namespace udareg {

inline constexpr double kMinAge = 0.0;
inline constexpr double kMaxAge = 116.0;

enum class Domain { Source, Target };

std::string_view to_string(Domain d);

struct Example {
    std::string id;
    Domain domain = Domain::Source;
    Vector features;
    std::optional<double> age;

    bool operator==(const Example&) const = default;
};

// Indices refer to the example list the pair was sampled from.
struct PairExample {
    std::size_t first = 0;
    std::size_t second = 0;
    Domain domain = Domain::Source;
    std::optional<double> diff;         // age(first) - age(second)
    std::optional<double> rank_target;  // rank_target(diff)

    bool operator==(const PairExample&) const = default;
};

struct SyntheticConfig {
    std::size_t dim = 16;
    std::size_t n_source = 1000;
    std::size_t n_target = 1000;
    double shift_strength = 1.5;
    double noise_std = 0.05;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SyntheticDataset {
    std::vector<Example> source;
    std::vector<Example> target;  // ages kept for evaluation only
    Matrix source_mixing;         // dim x 4
    Matrix target_mixing;         // source_mixing + shift_strength * delta
};

// [u/100, (u/100)^2, sin(pi u/100), cos(pi u/100)]
std::array<double, 4> synthetic_basis(double age);

SyntheticDataset generate_synthetic(const SyntheticConfig& cfg);

struct EmbeddingSchema {
    std::optional<std::size_t> dim;  // required feature count, if known
};

// Delimiter-separated text: header id,domain,age,f0..f{D-1}; comma or tab;
// '#' comment lines and blank lines skipped; age may be empty on target rows.
std::vector<Example> load_embeddings(const std::filesystem::path& path, const EmbeddingSchema& schema = {});
std::vector<Example> parse_embeddings(std::istream& in, const EmbeddingSchema& schema = {},
                                      const std::string& source_name = "<stream>");
void write_embeddings(std::ostream& out, std::span<const Example> examples);
void write_embeddings(const std::filesystem::path& path, std::span<const Example> examples);

// Uniform same-domain pairs without self-pairing. With require_labels only
// labeled examples are eligible. diff and rank_target are filled whenever
// both members carry a label.
std::vector<PairExample> sample_pairs(std::span<const Example> examples, std::size_t count,
                                      std::uint64_t seed, bool require_labels);

struct NormalizationMap {
    double lo = 0.0;
    double hi = 1.0;

    // Fits [min, max] of the labels. Throws DataError for fewer than two
    // distinct labels.
    static NormalizationMap fit(std::span<const double> labels);

    double apply(double y) const { return (y - lo) / (hi - lo); }
    double invert(double n) const { return lo + n * (hi - lo); }
    // Differences scale without offset so antisymmetry is preserved.
    double apply_diff(double d) const { return d / (hi - lo); }
    double invert_diff(double n) const { return n * (hi - lo); }

    bool operator==(const NormalizationMap&) const = default;
};

struct Split {
    std::vector<Example> train;
    std::vector<Example> val;
};

// Deterministic in (ids, seed): examples are ordered by a seeded hash of
// their id and the first round(train_fraction * n) go to train.
Split split_train_val(std::span<const Example> examples, double train_fraction, std::uint64_t seed);

std::vector<double> labels_of(std::span<const Example> examples);

}  // namespace udareg
