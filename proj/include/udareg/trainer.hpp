#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "udareg/data.hpp"
#include "udareg/losses.hpp"
#include "udareg/model.hpp"

namespace udareg {

enum class Variant { SourceOnly, DANN, MMD, PairwiseSourceOnly, PairwiseDANN, PairwiseMMD };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);
ModelMode mode_of(Variant v);
Adaptation adaptation_of(Variant v);

struct Architecture {
    std::size_t trunk_width = 64;
    std::vector<std::size_t> fc_widths = {32, 16, 8};
    std::vector<std::size_t> discriminator_widths = {32, 16};
};

struct TrainConfig {
    Variant variant = Variant::SourceOnly;
    std::size_t epochs = 50;
    std::size_t batch_size = 16;
    double lr = 1e-3;
    double discriminator_lr = 1e-3;
    CompositeLossConfig loss;  // loss.adaptation is overridden by the variant
    AdaptLayerSet adapt_layers = AdaptLayerSet::parse("conv+fc1");
    bool normalize_labels = true;
    std::size_t pretrain_epochs = 0;
    std::uint64_t seed = 1;
    double grl_lambda = 1.0;
    std::size_t eval_pairs = 500;
    KernelConfig mmd_kernel;
    KernelConfig smooth_kernel;
    Architecture architecture;

    void validate() const;
    // Loss configuration actually optimized (adaptation from the variant,
    // disabled when no layers are selected).
    CompositeLossConfig effective_loss() const;
};

struct TrainingData {
    std::vector<Example> source_train;
    std::vector<Example> source_val;
    std::vector<Example> target;  // labels, if any, are read by evaluation only
};

// Source split 80/20 (or train_fraction) by seeded id hash; target kept whole.
TrainingData make_training_data(std::span<const Example> source, std::span<const Example> target,
                                double train_fraction, std::uint64_t seed);

struct MetricsRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double source_train_mae = 0.0;
    double source_val_mae = 0.0;
    std::optional<double> target_mae;  // absent when the target set is unlabeled

    bool operator==(const MetricsRow&) const = default;
};

struct MetricsReport {
    std::optional<MetricsRow> initial;  // before the first update
    std::vector<MetricsRow> rows;       // one per epoch, in order
    std::optional<std::size_t> best_epoch;

    const MetricsRow* best() const;
    bool operator==(const MetricsReport&) const = default;
};

struct TrainResult {
    ModelAssembly model;  // best epoch by source-val MAE, chosen among post-pretraining epochs
    MetricsReport report;
};

// Called after every epoch with the current (not best) model.
using EpochObserver = std::function<void(std::size_t epoch, const ModelAssembly&)>;

// Throws DivergenceError (with step and term values) on a non-finite loss.
TrainResult train(const TrainConfig& config, const TrainingData& data, const EpochObserver& observer = {});

// Single: mean |pred - age| over examples. Pairwise: mean |pred_diff -
// true_diff| over `pair_count` same-domain pairs drawn with `pair_seed`.
// Throws DataError on an unlabeled example.
double evaluate_mae(const ModelAssembly& model, std::span<const Example> examples, std::uint64_t pair_seed = 0,
                    std::size_t pair_count = 500);

struct GridAxes {
    std::vector<Variant> variants;
    std::vector<double> gammas;
    std::vector<AdaptLayerSet> layer_sets;
    std::vector<bool> rank;

    void validate() const;
};

struct GridCell {
    TrainConfig config;
    std::optional<MetricsReport> report;
    std::string error;  // nonempty when the cell failed

    bool failed() const { return !report.has_value(); }
};

// One run per distinct effective configuration; cells sorted by target MAE
// (then source-val MAE), failed cells last. `jobs` > 1 runs cells in parallel.
std::vector<GridCell> run_experiment_grid(const TrainConfig& base, const GridAxes& axes, const TrainingData& data,
                                          std::size_t jobs = 1);

void write_metrics_csv(std::ostream& out, const MetricsReport& report);
void write_metrics_table(std::ostream& out, const MetricsReport& report);
// One-line summary in the "S Val Loss / Target Loss" layout with a gamma column.
void write_summary_table(std::ostream& out, const TrainConfig& config, const MetricsReport& report);
void write_grid_csv(std::ostream& out, std::span<const GridCell> cells);
void write_grid_table(std::ostream& out, std::span<const GridCell> cells);

}  // namespace udareg
