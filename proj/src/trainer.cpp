#include "udareg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <ostream>
#include <tuple>

#include <fmt/format.h>

#include "udareg/rng.hpp"

namespace udareg {

namespace {

enum : std::uint64_t {
    kStreamSourceOrder = 0x1000,
    kStreamTargetOrder = 0x2000,
    kStreamEvalTrain = 0x3001,
    kStreamEvalVal = 0x3002,
    kStreamEvalTarget = 0x3003,
};

// Trunk inputs for one side of a step. swapped/self are filled in Pairwise
// mode when the identity term is active.
struct Batch {
    std::vector<Vector> inputs;
    std::vector<Vector> swapped;  // (b, a)
    std::vector<Vector> self;     // (a, a)
    Vector targets;               // regression targets, source only
    Vector diffs;                 // raw age differences, Pairwise source only

    std::size_t size() const { return inputs.size(); }
};

bool all_labeled(std::span<const Example> examples) {
    return std::all_of(examples.begin(), examples.end(), [](const Example& e) { return e.age.has_value(); });
}

Vector concat(const std::vector<Vector>& parts) {
    Vector out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

class Trainer {
public:
    Trainer(const TrainConfig& config, const TrainingData& data) : cfg_(config), data_(data) {
        cfg_.validate();
        if (data_.source_train.size() < 2) throw DataError("training needs at least two source training examples");
        if (data_.source_val.empty()) throw DataError("training needs a nonempty source validation set");
        if (!all_labeled(data_.source_train) || !all_labeled(data_.source_val)) {
            throw DataError("source examples must be labeled");
        }
        const std::size_t dim = data_.source_train.front().features.size();
        for (const auto* set : {&data_.source_train, &data_.source_val, &data_.target}) {
            for (const auto& ex : *set) {
                if (ex.features.size() != dim) {
                    throw ShapeError(fmt::format("example '{}' has {} features, expected {}", ex.id, ex.features.size(), dim));
                }
            }
        }
        mode_ = mode_of(cfg_.variant);
        loss_ = cfg_.effective_loss();
        pretrain_loss_ = loss_;
        pretrain_loss_.gamma = 0.0;
        pretrain_loss_.beta = 0.0;
        pretrain_loss_.sigma_smooth = 0.0;
        pretrain_loss_.adaptation = Adaptation::None;

        const auto train_labels = labels_of(data_.source_train);
        if (cfg_.normalize_labels) normalization_ = NormalizationMap::fit(train_labels);

        ModelOptions options;
        options.feature_dim = dim;
        options.mode = mode_;
        options.rank_head = mode_ == ModelMode::Pairwise && loss_.alpha > 0.0;
        options.trunk_width = cfg_.architecture.trunk_width;
        options.fc_widths = cfg_.architecture.fc_widths;
        options.discriminator_widths = cfg_.architecture.discriminator_widths;
        options.adapt_layers = loss_.adaptation == Adaptation::None ? AdaptLayerSet{} : cfg_.adapt_layers;
        options.seed = cfg_.seed;
        if (mode_ == ModelMode::Single) {
            double mean = 0.0;
            for (double y : train_labels) mean += normalization_ ? normalization_->apply(y) : y;
            options.output_bias = mean / static_cast<double>(train_labels.size());
        }
        model_ = build_model(options);
        model_.normalization = normalization_;

        model_opt_[0] = OptimizerState::adam(cfg_.lr);
        model_opt_[1] = OptimizerState::adam(cfg_.lr);
        model_opt_[2] = OptimizerState::adam(cfg_.lr);
        disc_opt_ = OptimizerState::sgd(cfg_.discriminator_lr);
    }

    TrainResult run(const EpochObserver& observer) {
        TrainResult result;
        if (cfg_.epochs == 0) {
            result.model = model_;
            return result;
        }
        result.report.initial = evaluate_row(0, 0.0);
        double best_val = std::numeric_limits<double>::infinity();
        ModelAssembly best_model = model_;

        for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
            const bool pretraining = epoch <= cfg_.pretrain_epochs;
            const double loss = mode_ == ModelMode::Single ? run_single_epoch(epoch, pretraining)
                                                           : run_pairwise_epoch(epoch, pretraining);
            MetricsRow row = evaluate_row(epoch, loss);
            result.report.rows.push_back(row);
            // After pretraining, only adapted epochs compete for best.
            if (!pretraining && row.source_val_mae < best_val) {
                best_val = row.source_val_mae;
                best_model = model_;
                result.report.best_epoch = epoch;
            }
            if (observer) observer(epoch, model_);
        }
        result.model = std::move(best_model);
        return result;
    }

private:
    const CompositeLossConfig& phase_loss(bool pretraining) const { return pretraining ? pretrain_loss_ : loss_; }

    static bool needs_target(const CompositeLossConfig& loss) {
        return (loss.gamma > 0.0 && loss.adaptation != Adaptation::None) || loss.beta > 0.0 || loss.sigma_smooth > 0.0;
    }

    double target_value(double age) const { return normalization_ ? normalization_->apply(age) : age; }
    double target_diff(double diff) const { return normalization_ ? normalization_->apply_diff(diff) : diff; }

    double run_single_epoch(std::size_t epoch, bool pretraining) {
        const auto& loss = phase_loss(pretraining);
        const std::size_t bs = cfg_.batch_size;
        std::vector<std::size_t> order(data_.source_train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        auto rng = make_rng(cfg_.seed, kStreamSourceOrder + epoch);
        shuffle_in_place(order, rng);

        std::vector<std::size_t> target_order(data_.target.size());
        for (std::size_t i = 0; i < target_order.size(); ++i) target_order[i] = i;
        auto target_rng = make_rng(cfg_.seed, kStreamTargetOrder + epoch);
        shuffle_in_place(target_order, target_rng);
        std::size_t target_cursor = 0;
        const bool use_target = needs_target(loss);
        if (use_target && data_.target.size() < 2) throw DataError("adaptation needs at least two target examples");

        double total = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start + 2 <= order.size(); start += bs) {
            const std::size_t end = std::min(order.size(), start + bs);
            Batch src;
            for (std::size_t k = start; k < end; ++k) {
                const auto& ex = data_.source_train[order[k]];
                src.inputs.push_back(ex.features);
                src.targets.push_back(target_value(*ex.age));
            }
            Batch tgt;
            if (use_target) {
                for (std::size_t k = 0; k < src.size(); ++k) {
                    tgt.inputs.push_back(data_.target[target_order[target_cursor]].features);
                    target_cursor = (target_cursor + 1) % target_order.size();
                }
            }
            total += step(src, tgt, loss);
            ++steps;
        }
        return steps ? total / static_cast<double>(steps) : 0.0;
    }

    double run_pairwise_epoch(std::size_t epoch, bool pretraining) {
        const auto& loss = phase_loss(pretraining);
        const std::size_t bs = cfg_.batch_size;
        const std::size_t steps = std::max<std::size_t>(1, data_.source_train.size() / bs);
        const auto src_pairs = sample_pairs(data_.source_train, steps * bs,
                                            derive_seed(cfg_.seed, kStreamSourceOrder + epoch), true);
        const bool use_target = needs_target(loss);
        std::vector<PairExample> tgt_pairs;
        if (use_target) {
            tgt_pairs = sample_pairs(data_.target, steps * bs, derive_seed(cfg_.seed, kStreamTargetOrder + epoch), false);
        }
        const bool identity = loss.beta > 0.0;

        auto fill = [&](Batch& batch, const std::vector<Example>& examples, const PairExample& pair) {
            const auto& a = examples[pair.first].features;
            const auto& b = examples[pair.second].features;
            batch.inputs.push_back(pair_input(a, b));
            if (identity) {
                batch.swapped.push_back(pair_input(b, a));
                batch.self.push_back(pair_input(a, a));
            }
        };

        double total = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            Batch src;
            Batch tgt;
            for (std::size_t k = s * bs; k < (s + 1) * bs; ++k) {
                const auto& pair = src_pairs[k];
                fill(src, data_.source_train, pair);
                src.targets.push_back(target_diff(*pair.diff));
                src.diffs.push_back(*pair.diff);
                if (use_target) fill(tgt, data_.target, tgt_pairs[k]);
            }
            total += step(src, tgt, loss);
        }
        return total / static_cast<double>(steps);
    }

    std::vector<Vector> reversed_layer_grads(const Vector& input_grad) const {
        const Vector reversed = reverse_gradient(input_grad, cfg_.grl_lambda);
        std::vector<Vector> out;
        std::size_t offset = 0;
        for (const auto& name : model_.adapt_layers.names()) {
            const std::size_t w = model_.layer_width(name);
            out.emplace_back(reversed.begin() + static_cast<std::ptrdiff_t>(offset),
                             reversed.begin() + static_cast<std::ptrdiff_t>(offset + w));
            offset += w;
        }
        return out;
    }

    double step(const Batch& src, const Batch& tgt, const CompositeLossConfig& loss) {
        ++step_count_;
        const bool adversarial = loss.gamma > 0.0 && loss.adaptation == Adaptation::Adversarial;
        const bool mmd = loss.gamma > 0.0 && loss.adaptation == Adaptation::MMD;
        const bool ranking = loss.alpha > 0.0;
        const bool identity = loss.beta > 0.0;
        const bool smooth = loss.sigma_smooth > 0.0;
        const AdaptLayerSet& layers = model_.adapt_layers;
        const std::size_t ns = src.size();
        const std::size_t nt = tgt.size();

        std::vector<ModelPass> sp(ns);
        std::vector<ModelPass> tp(nt);
        CompositeInputs in;
        in.mmd_kernel = cfg_.mmd_kernel;
        in.smooth_kernel = cfg_.smooth_kernel;
        for (std::size_t i = 0; i < ns; ++i) {
            sp[i] = forward_pass(model_, src.inputs[i]);
            in.reg_pred.push_back(sp[i].output);
            if (ranking) in.rank_pred.push_back(sp[i].rank_prob);
        }
        in.reg_target = src.targets;
        if (ranking) in.rank_diff = src.diffs;
        for (std::size_t j = 0; j < nt; ++j) tp[j] = forward_pass(model_, tgt.inputs[j]);

        std::vector<Tape> disc_tapes;
        if (adversarial || mmd) {
            std::vector<std::vector<Vector>> acts;
            for (const auto& p : sp) acts.push_back(p.adapt_activations(layers));
            for (const auto& p : tp) acts.push_back(p.adapt_activations(layers));
            if (adversarial) {
                for (std::size_t k = 0; k < acts.size(); ++k) {
                    auto r = forward(*model_.discriminator, concat(acts[k]));
                    in.domain_pred.push_back(r.output[0]);
                    in.domain_label.push_back(k < ns ? 0.0 : 1.0);
                    disc_tapes.push_back(std::move(r.tape));
                }
            } else {
                const std::size_t n_layers = layers.names().size();
                for (std::size_t l = 0; l < n_layers; ++l) {
                    std::vector<Vector> s_rows;
                    std::vector<Vector> t_rows;
                    for (std::size_t k = 0; k < ns; ++k) s_rows.push_back(acts[k][l]);
                    for (std::size_t k = ns; k < ns + nt; ++k) t_rows.push_back(acts[k][l]);
                    in.mmd_source.push_back(stack_rows(s_rows));
                    in.mmd_target.push_back(stack_rows(t_rows));
                }
            }
        }

        std::vector<ModelPass> s_ba, s_aa, t_ba, t_aa;
        if (identity) {
            auto group = [&](const Batch& b, const std::vector<ModelPass>& ab, std::vector<ModelPass>& ba,
                             std::vector<ModelPass>& aa) {
                IdentityBatch id;
                for (std::size_t k = 0; k < b.size(); ++k) {
                    ba.push_back(forward_pass(model_, b.swapped[k]));
                    aa.push_back(forward_pass(model_, b.self[k]));
                    id.f1_ab.push_back(ab[k].output);
                    id.f1_ba.push_back(ba[k].output);
                    id.f1_aa.push_back(aa[k].output);
                    id.f2_ab.push_back(ab[k].rank_prob);
                    id.f2_ba.push_back(ba[k].rank_prob);
                }
                in.identity.push_back(std::move(id));
            };
            group(src, sp, s_ba, s_aa);
            if (nt > 0) group(tgt, tp, t_ba, t_aa);
        }

        if (smooth) {
            std::vector<Vector> feats;
            for (const auto& p : sp) {
                feats.push_back(p.trunk_features());
                in.smooth_preds.push_back(p.output);
            }
            for (const auto& p : tp) {
                feats.push_back(p.trunk_features());
                in.smooth_preds.push_back(p.output);
            }
            in.smooth_feats = stack_rows(feats);
        }

        const CompositeResult res = composite_loss(in, loss);
        if (!std::isfinite(res.total)) {
            throw DivergenceError(fmt::format(
                "non-finite loss at step {}: regression={} rank={} adaptation={} identity={} smoothing={}", step_count_,
                res.terms.regression, res.terms.rank, res.terms.adaptation, res.terms.identity, res.terms.smoothing));
        }

        ModelGrads grads = ModelGrads::zeros(model_);
        Parameters disc_grads;
        if (model_.discriminator) disc_grads = Parameters::zeros(model_.discriminator->spec);

        auto layer_grads = [&](std::size_t pooled, bool is_source, std::size_t idx) {
            std::vector<Vector> lg;
            if (adversarial) {
                const Vector seed{res.grad_domain_pred[pooled]};
                auto b = backward(*model_.discriminator, disc_tapes[pooled], seed);
                disc_grads.add_scaled(b.param_grads, 1.0);
                lg = reversed_layer_grads(b.input_grad);
            } else if (mmd) {
                const auto& g = is_source ? res.grad_mmd_source : res.grad_mmd_target;
                for (const auto& m : g) lg.emplace_back(m.row(idx).begin(), m.row(idx).end());
            }
            return lg;
        };

        for (std::size_t i = 0; i < ns; ++i) {
            double out_grad = res.grad_reg_pred[i];
            double rank_grad = ranking ? res.grad_rank_pred[i] : 0.0;
            if (smooth) out_grad += res.grad_smooth_preds[i];
            if (identity) {
                out_grad += res.grad_identity[0].f1_ab[i];
                rank_grad += res.grad_identity[0].f2_ab[i];
            }
            const auto lg = layer_grads(i, true, i);
            backward_pass(model_, sp[i], out_grad, rank_grad, layers, lg, grads);
            if (identity) {
                const auto& g = res.grad_identity[0];
                backward_pass(model_, s_ba[i], g.f1_ba[i], g.f2_ba[i], layers, {}, grads);
                backward_pass(model_, s_aa[i], g.f1_aa[i], 0.0, layers, {}, grads);
            }
        }
        for (std::size_t j = 0; j < nt; ++j) {
            double out_grad = smooth ? res.grad_smooth_preds[ns + j] : 0.0;
            double rank_grad = 0.0;
            if (identity) {
                out_grad += res.grad_identity[1].f1_ab[j];
                rank_grad += res.grad_identity[1].f2_ab[j];
            }
            const auto lg = layer_grads(ns + j, false, j);
            backward_pass(model_, tp[j], out_grad, rank_grad, layers, lg, grads);
            if (identity) {
                const auto& g = res.grad_identity[1];
                backward_pass(model_, t_ba[j], g.f1_ba[j], g.f2_ba[j], layers, {}, grads);
                backward_pass(model_, t_aa[j], g.f1_aa[j], 0.0, layers, {}, grads);
            }
        }

        optimizer_step(model_opt_[0], model_.trunk.params, grads.trunk);
        optimizer_step(model_opt_[1], model_.regression.params, grads.regression);
        if (model_.rank_head) optimizer_step(model_opt_[2], model_.rank_head->params, grads.rank_head);
        if (adversarial) optimizer_step(disc_opt_, model_.discriminator->params, disc_grads);
        return res.total;
    }

    MetricsRow evaluate_row(std::size_t epoch, double train_loss) const {
        MetricsRow row;
        row.epoch = epoch;
        row.train_loss = train_loss;
        row.source_train_mae = evaluate_mae(model_, data_.source_train, derive_seed(cfg_.seed, kStreamEvalTrain), cfg_.eval_pairs);
        row.source_val_mae = evaluate_mae(model_, data_.source_val, derive_seed(cfg_.seed, kStreamEvalVal), cfg_.eval_pairs);
        if (!data_.target.empty() && all_labeled(data_.target)) {
            row.target_mae = evaluate_mae(model_, data_.target, derive_seed(cfg_.seed, kStreamEvalTarget), cfg_.eval_pairs);
        }
        const bool finite = std::isfinite(row.train_loss) && std::isfinite(row.source_train_mae) &&
                            std::isfinite(row.source_val_mae) && (!row.target_mae || std::isfinite(*row.target_mae));
        if (!finite) throw DivergenceError(fmt::format("non-finite metrics after epoch {}", epoch));
        return row;
    }

    TrainConfig cfg_;
    const TrainingData& data_;
    ModelMode mode_ = ModelMode::Single;
    CompositeLossConfig loss_;
    CompositeLossConfig pretrain_loss_;
    std::optional<NormalizationMap> normalization_;
    ModelAssembly model_;
    OptimizerState model_opt_[3];
    OptimizerState disc_opt_;
    std::size_t step_count_ = 0;
};

std::string format_optional(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : std::string{}; }

}  // namespace

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::SourceOnly: return "source_only";
        case Variant::DANN: return "dann";
        case Variant::MMD: return "mmd";
        case Variant::PairwiseSourceOnly: return "pairwise_source_only";
        case Variant::PairwiseDANN: return "pairwise_dann";
        case Variant::PairwiseMMD: return "pairwise_mmd";
    }
    return "source_only";
}

Variant parse_variant(std::string_view s) {
    for (auto v : {Variant::SourceOnly, Variant::DANN, Variant::MMD, Variant::PairwiseSourceOnly, Variant::PairwiseDANN,
                   Variant::PairwiseMMD}) {
        if (to_string(v) == s) return v;
    }
    throw ConfigError(fmt::format("unknown variant '{}'", s));
}

ModelMode mode_of(Variant v) {
    switch (v) {
        case Variant::SourceOnly:
        case Variant::DANN:
        case Variant::MMD: return ModelMode::Single;
        default: return ModelMode::Pairwise;
    }
}

Adaptation adaptation_of(Variant v) {
    switch (v) {
        case Variant::DANN:
        case Variant::PairwiseDANN: return Adaptation::Adversarial;
        case Variant::MMD:
        case Variant::PairwiseMMD: return Adaptation::MMD;
        default: return Adaptation::None;
    }
}

void TrainConfig::validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
    if (!(discriminator_lr > 0.0) || !std::isfinite(discriminator_lr)) throw ConfigError("discriminator_lr must be positive");
    if (pretrain_epochs > 0 && pretrain_epochs >= epochs) throw ConfigError("pretrain_epochs must be smaller than epochs");
    if (!(grl_lambda > 0.0) || !std::isfinite(grl_lambda)) throw ConfigError("grl_lambda must be positive");
    if (eval_pairs == 0) throw ConfigError("eval_pairs must be positive");
    loss.validate();
    mmd_kernel.validate();
    smooth_kernel.validate();
    if (adaptation_of(variant) != Adaptation::None && loss.gamma > 0.0 && adapt_layers.empty()) {
        throw ConfigError(fmt::format("variant {} needs at least one adaptation layer", to_string(variant)));
    }
    if (mode_of(variant) == ModelMode::Single && (loss.alpha > 0.0 || loss.beta > 0.0)) {
        throw ConfigError("ranking (alpha) and identity (beta) terms need a pairwise variant");
    }
    ModelOptions probe;
    probe.trunk_width = architecture.trunk_width;
    probe.fc_widths = architecture.fc_widths;
    probe.discriminator_widths = architecture.discriminator_widths;
    probe.validate();
}

CompositeLossConfig TrainConfig::effective_loss() const {
    CompositeLossConfig out = loss;
    out.adaptation = adaptation_of(variant);
    if (adapt_layers.empty() || loss.gamma == 0.0) {
        out.adaptation = Adaptation::None;
        out.gamma = 0.0;
    }
    return out;
}

TrainingData make_training_data(std::span<const Example> source, std::span<const Example> target,
                                double train_fraction, std::uint64_t seed) {
    for (const auto& ex : source) {
        if (ex.domain != Domain::Source) throw DataError(fmt::format("example '{}' is not a source example", ex.id));
    }
    for (const auto& ex : target) {
        if (ex.domain != Domain::Target) throw DataError(fmt::format("example '{}' is not a target example", ex.id));
    }
    auto split = split_train_val(source, train_fraction, seed);
    return {std::move(split.train), std::move(split.val), std::vector<Example>(target.begin(), target.end())};
}

const MetricsRow* MetricsReport::best() const {
    if (!best_epoch) return nullptr;
    for (const auto& row : rows) {
        if (row.epoch == *best_epoch) return &row;
    }
    return nullptr;
}

TrainResult train(const TrainConfig& config, const TrainingData& data, const EpochObserver& observer) {
    Trainer trainer(config, data);
    return trainer.run(observer);
}

double evaluate_mae(const ModelAssembly& model, std::span<const Example> examples, std::uint64_t pair_seed,
                    std::size_t pair_count) {
    if (examples.empty()) throw DataError("evaluate_mae: no examples");
    for (const auto& ex : examples) {
        if (!ex.age) throw DataError(fmt::format("evaluate_mae: example '{}' is unlabeled", ex.id));
    }
    double total = 0.0;
    if (model.mode == ModelMode::Single) {
        for (const auto& ex : examples) total += std::abs(predict_single(model, ex.features) - *ex.age);
        return total / static_cast<double>(examples.size());
    }
    const auto pairs = sample_pairs(examples, pair_count, pair_seed, true);
    for (const auto& pair : pairs) {
        const auto pred = predict_pair(model, examples[pair.first].features, examples[pair.second].features);
        total += std::abs(pred.age_diff - *pair.diff);
    }
    return total / static_cast<double>(pairs.size());
}

void GridAxes::validate() const {
    if (variants.empty()) throw ConfigError("grid axis 'variants' is empty");
    if (gammas.empty()) throw ConfigError("grid axis 'gammas' is empty");
    if (layer_sets.empty()) throw ConfigError("grid axis 'adapt_layers' is empty");
    if (rank.empty()) throw ConfigError("grid axis 'rank' is empty");
    for (double g : gammas) {
        if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("grid gammas must be finite and >= 0");
    }
}

std::vector<GridCell> run_experiment_grid(const TrainConfig& base, const GridAxes& axes, const TrainingData& data,
                                          std::size_t jobs) {
    axes.validate();
    const bool wants_rank = std::find(axes.rank.begin(), axes.rank.end(), true) != axes.rank.end();
    const bool any_pairwise = std::any_of(axes.variants.begin(), axes.variants.end(),
                                          [](Variant v) { return mode_of(v) == ModelMode::Pairwise; });
    if (wants_rank && any_pairwise && !(base.loss.alpha > 0.0)) {
        throw ConfigError("grid rank axis includes true but loss.alpha is 0");
    }

    std::vector<GridCell> cells;
    std::map<std::tuple<int, double, std::string, double, double>, bool> seen;
    for (Variant v : axes.variants) {
        for (double gamma : axes.gammas) {
            for (const auto& layers : axes.layer_sets) {
                for (bool rank : axes.rank) {
                    TrainConfig cfg = base;
                    cfg.variant = v;
                    cfg.loss.gamma = gamma;
                    cfg.adapt_layers = layers;
                    if (mode_of(v) == ModelMode::Single) {
                        cfg.loss.alpha = 0.0;
                        cfg.loss.beta = 0.0;
                    } else if (!rank) {
                        cfg.loss.alpha = 0.0;
                    }
                    if (adaptation_of(v) == Adaptation::None || layers.empty() || gamma == 0.0) {
                        cfg.variant = mode_of(v) == ModelMode::Single ? Variant::SourceOnly : Variant::PairwiseSourceOnly;
                        cfg.loss.gamma = 0.0;
                        cfg.adapt_layers = AdaptLayerSet{};
                    }
                    const auto key = std::make_tuple(static_cast<int>(cfg.variant), cfg.loss.gamma,
                                                     cfg.adapt_layers.label(), cfg.loss.alpha, cfg.loss.beta);
                    if (seen.emplace(key, true).second) cells.push_back({cfg, std::nullopt, {}});
                }
            }
        }
    }

    const auto n_cells = static_cast<std::ptrdiff_t>(cells.size());
    const int threads = static_cast<int>(std::max<std::size_t>(1, jobs));
#pragma omp parallel for num_threads(threads) schedule(dynamic, 1)
    for (std::ptrdiff_t c = 0; c < n_cells; ++c) {
        auto& cell = cells[static_cast<std::size_t>(c)];
        try {
            cell.report = train(cell.config, data).report;
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    }

    auto sort_key = [](const GridCell& cell) {
        const MetricsRow* best = cell.report ? cell.report->best() : nullptr;
        const double inf = std::numeric_limits<double>::infinity();
        const double target = best && best->target_mae ? *best->target_mae : inf;
        const double val = best ? best->source_val_mae : inf;
        return std::make_tuple(cell.failed() ? 1 : 0, target, val);
    };
    std::stable_sort(cells.begin(), cells.end(),
                     [&](const GridCell& a, const GridCell& b) { return sort_key(a) < sort_key(b); });
    return cells;
}

void write_metrics_csv(std::ostream& out, const MetricsReport& report) {
    out << "epoch,train_loss,source_train_mae,source_val_mae,target_mae\n";
    for (const auto& r : report.rows) {
        out << fmt::format("{},{:.6f},{:.6f},{:.6f},{}\n", r.epoch, r.train_loss, r.source_train_mae, r.source_val_mae,
                           format_optional(r.target_mae));
    }
}

void write_metrics_table(std::ostream& out, const MetricsReport& report) {
    out << fmt::format("{:>6}  {:>12}  {:>12}  {:>12}  {:>12}\n", "epoch", "train loss", "S Train MAE", "S Val Loss",
                       "Target Loss");
    auto line = [&](const MetricsRow& r, std::string_view label) {
        out << fmt::format("{:>6}  {:>12.4f}  {:>12.4f}  {:>12.4f}  {:>12}\n", label, r.train_loss, r.source_train_mae,
                           r.source_val_mae, r.target_mae ? fmt::format("{:.4f}", *r.target_mae) : "-");
    };
    if (report.initial) line(*report.initial, "init");
    for (const auto& r : report.rows) {
        line(r, fmt::format("{}{}", r.epoch, report.best_epoch && *report.best_epoch == r.epoch ? "*" : ""));
    }
}

void write_summary_table(std::ostream& out, const TrainConfig& config, const MetricsReport& report) {
    const auto loss = config.effective_loss();
    out << fmt::format("{:<22}  {:<11}  {:>6}  {:>6}  {:>10}  {:>11}  {:>11}\n", "variant", "layers", "gamma", "alpha",
                       "best epoch", "S Val Loss", "Target Loss");
    const MetricsRow* best = report.best();
    out << fmt::format("{:<22}  {:<11}  {:>6}  {:>6}  {:>10}  {:>11}  {:>11}\n", to_string(config.variant),
                       loss.adaptation == Adaptation::None ? "none" : config.adapt_layers.label(), loss.gamma,
                       config.loss.alpha, best ? fmt::format("{}", best->epoch) : "-",
                       best ? fmt::format("{:.4f}", best->source_val_mae) : "-",
                       best && best->target_mae ? fmt::format("{:.4f}", *best->target_mae) : "-");
}

void write_grid_csv(std::ostream& out, std::span<const GridCell> cells) {
    out << "variant,layers,gamma,alpha,best_epoch,source_val_mae,target_mae,status\n";
    for (const auto& cell : cells) {
        const MetricsRow* best = cell.report ? cell.report->best() : nullptr;
        std::string error = cell.error;
        std::replace(error.begin(), error.end(), ',', ';');
        std::replace(error.begin(), error.end(), '\n', ' ');
        out << fmt::format("{},{},{},{},{},{},{},{}\n", to_string(cell.config.variant), cell.config.adapt_layers.label(),
                           cell.config.loss.gamma, cell.config.loss.alpha, best ? fmt::format("{}", best->epoch) : "",
                           best ? fmt::format("{:.6f}", best->source_val_mae) : "",
                           best ? format_optional(best->target_mae) : "", cell.failed() ? "failed: " + error : "ok");
    }
}

void write_grid_table(std::ostream& out, std::span<const GridCell> cells) {
    out << fmt::format("{:<22}  {:<11}  {:>6}  {:>6}  {:>11}  {:>11}  {}\n", "variant", "layers", "gamma", "alpha",
                       "S Val Loss", "Target Loss", "status");
    for (const auto& cell : cells) {
        const MetricsRow* best = cell.report ? cell.report->best() : nullptr;
        out << fmt::format("{:<22}  {:<11}  {:>6}  {:>6}  {:>11}  {:>11}  {}\n", to_string(cell.config.variant),
                           cell.config.adapt_layers.label(), cell.config.loss.gamma, cell.config.loss.alpha,
                           best ? fmt::format("{:.4f}", best->source_val_mae) : "-",
                           best && best->target_mae ? fmt::format("{:.4f}", *best->target_mae) : "-",
                           cell.failed() ? "failed: " + cell.error : "ok");
    }
}

}  // namespace udareg
