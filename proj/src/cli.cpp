#include "udareg/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "udareg/checkpoint.hpp"

namespace udareg {

namespace {

using nlohmann::json;

// Object view that records which keys were read so leftovers can be rejected.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(fmt::format("'{}' must be an object", display()));
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json* raw(const std::string& key) {
        seen_.insert(key);
        auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    Section child(const std::string& key) {
        const json* j = raw(key);
        static const json empty = json::object();
        return Section(j ? *j : empty, qualified(key));
    }

    void get(const std::string& key, double& out) {
        if (const json* j = raw(key)) {
            if (!j->is_number()) fail(key, "must be a number");
            out = j->get<double>();
            if (!std::isfinite(out)) fail(key, "must be finite");
        }
    }

    template <class T>
        requires std::is_unsigned_v<T> && (!std::is_same_v<T, bool>)
    void get(const std::string& key, T& out) {
        if (const json* j = raw(key)) out = static_cast<T>(to_count(*j, key));
    }

    void get(const std::string& key, bool& out) {
        if (const json* j = raw(key)) {
            if (!j->is_boolean()) fail(key, "must be true or false");
            out = j->get<bool>();
        }
    }

    void get(const std::string& key, std::string& out) {
        if (const json* j = raw(key)) out = to_string_value(*j, key);
    }

    void get(const std::string& key, std::optional<double>& out) {
        if (const json* j = raw(key)) {
            if (j->is_null()) {
                out.reset();
            } else {
                double v = 0.0;
                get(key, v);
                out = v;
            }
        }
    }

    template <class T, class Convert>
    void get_list(const std::string& key, std::vector<T>& out, Convert convert) {
        if (const json* j = raw(key)) {
            if (!j->is_array()) fail(key, "must be a list");
            out.clear();
            for (const auto& item : *j) out.push_back(convert(item, key));
        }
    }

    std::size_t to_count(const json& j, const std::string& key) const {
        if (!j.is_number_unsigned()) fail(key, "must be a nonnegative integer");
        return j.get<std::size_t>();
    }

    std::string to_string_value(const json& j, const std::string& key) const {
        if (!j.is_string()) fail(key, "must be a string");
        return j.get<std::string>();
    }

    double to_number(const json& j, const std::string& key) const {
        if (!j.is_number() || !std::isfinite(j.get<double>())) fail(key, "must contain finite numbers");
        return j.get<double>();
    }

    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(fmt::format("unknown config key '{}'", qualified(it.key())));
        }
    }

    [[noreturn]] void fail(const std::string& key, std::string_view what) const {
        throw ConfigError(fmt::format("config key '{}' {}", qualified(key), what));
    }

private:
    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string display() const { return path_.empty() ? "<root>" : path_; }

    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class F>
auto wrap_config(Section& s, const std::string& key, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        s.fail(key, fmt::format("is invalid: {}", e.what()));
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void read_synthetic(Section s, SyntheticConfig& cfg) {
    s.get("dim", cfg.dim);
    s.get("n_source", cfg.n_source);
    s.get("n_target", cfg.n_target);
    s.get("shift_strength", cfg.shift_strength);
    s.get("noise_std", cfg.noise_std);
    s.get("seed", cfg.seed);
    s.finish();
}

void read_data(Section s, DataSettings& data, const std::filesystem::path& base) {
    if (s.has("synthetic") && s.has("files")) throw ConfigError("config 'data' takes either 'synthetic' or 'files', not both");
    if (s.has("files")) {
        data.synthetic.reset();
        s.get_list("files", data.files, [&](const json& j, const std::string& key) {
            return resolve(base, s.to_string_value(j, key));
        });
    } else {
        SyntheticConfig cfg;
        read_synthetic(s.child("synthetic"), cfg);
        data.synthetic = cfg;
    }
    s.get("train_fraction", data.train_fraction);
    s.get("split_seed", data.split_seed);
    s.finish();
}

void read_loss(Section s, TrainConfig& train) {
    auto& loss = train.loss;
    s.get("alpha", loss.alpha);
    s.get("beta", loss.beta);
    s.get("gamma", loss.gamma);
    s.get("sigma_smooth", loss.sigma_smooth);
    std::string norm(to_string(loss.regression_norm));
    s.get("regression_norm", norm);
    loss.regression_norm = wrap_config(s, "regression_norm", [&] { return parse_regression_norm(norm); });
    s.get("mmd_bandwidth", train.mmd_kernel.bandwidth);
    s.get("smooth_bandwidth", train.smooth_kernel.bandwidth);
    s.finish();
}

std::vector<std::size_t> read_widths(Section& s, const std::string& key, std::vector<std::size_t> current) {
    s.get_list(key, current, [&](const json& j, const std::string& k) { return s.to_count(j, k); });
    return current;
}

void read_train(Section s, TrainConfig& train) {
    std::string variant(to_string(train.variant));
    s.get("variant", variant);
    train.variant = wrap_config(s, "variant", [&] { return parse_variant(variant); });
    s.get("epochs", train.epochs);
    s.get("batch_size", train.batch_size);
    s.get("lr", train.lr);
    s.get("discriminator_lr", train.discriminator_lr);
    std::string layers = train.adapt_layers.label();
    s.get("adapt_layers", layers);
    train.adapt_layers = wrap_config(s, "adapt_layers", [&] { return AdaptLayerSet::parse(layers); });
    s.get("normalize_labels", train.normalize_labels);
    s.get("pretrain_epochs", train.pretrain_epochs);
    s.get("seed", train.seed);
    s.get("grl_lambda", train.grl_lambda);
    s.get("eval_pairs", train.eval_pairs);
    Section arch = s.child("architecture");
    arch.get("trunk_width", train.architecture.trunk_width);
    train.architecture.fc_widths = read_widths(arch, "fc_widths", train.architecture.fc_widths);
    train.architecture.discriminator_widths =
        read_widths(arch, "discriminator_widths", train.architecture.discriminator_widths);
    arch.finish();
    s.finish();
}

void read_grid(Section s, GridAxes& grid) {
    s.get_list("variants", grid.variants, [&](const json& j, const std::string& key) {
        const auto name = s.to_string_value(j, key);
        return wrap_config(s, key, [&] { return parse_variant(name); });
    });
    s.get_list("gammas", grid.gammas, [&](const json& j, const std::string& key) { return s.to_number(j, key); });
    s.get_list("adapt_layers", grid.layer_sets, [&](const json& j, const std::string& key) {
        const auto label = s.to_string_value(j, key);
        return wrap_config(s, key, [&] { return AdaptLayerSet::parse(label); });
    });
    s.get_list("rank", grid.rank, [&](const json& j, const std::string& key) {
        if (!j.is_boolean()) s.fail(key, "must contain true/false values");
        return j.get<bool>();
    });
    s.finish();
}

void read_mds(Section s, MdsSettings& mds, const std::filesystem::path& base) {
    s.get_list("checkpoints", mds.checkpoints, [&](const json& j, const std::string& key) {
        return resolve(base, s.to_string_value(j, key));
    });
    s.get_list("anchors", mds.anchors, [&](const json& j, const std::string& key) { return s.to_string_value(j, key); });
    std::string domain(to_string(mds.domain));
    s.get("domain", domain);
    if (domain == "source") {
        mds.domain = Domain::Source;
    } else if (domain == "target") {
        mds.domain = Domain::Target;
    } else {
        s.fail("domain", "must be \"source\" or \"target\"");
    }
    s.get("max_items", mds.max_items);
    s.get("max_iter", mds.smacof.max_iter);
    s.get("tol", mds.smacof.tol);
    s.get("seed", mds.smacof.seed);
    s.finish();
}

GridAxes default_grid() {
    GridAxes g;
    g.variants = {Variant::DANN};
    g.gammas = {0.1, 0.3, 0.6, 1.0};
    g.layer_sets = {AdaptLayerSet::parse("conv+fc1")};
    g.rank = {false};
    return g;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    return out;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
}

template <class Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
    auto out = open_output(path);
    writer(out);
    if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

struct Anchor {
    std::string id;
    std::optional<double> age;
};

Anchor parse_anchor(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos) return {text, std::nullopt};
    const std::string id = text.substr(0, colon);
    const std::string age_text = text.substr(colon + 1);
    double age = 0.0;
    auto [ptr, ec] = std::from_chars(age_text.data(), age_text.data() + age_text.size(), age);
    if (id.empty() || ec != std::errc{} || ptr != age_text.data() + age_text.size() || !std::isfinite(age)) {
        throw ConfigError(fmt::format("anchor '{}' must look like <id> or <id>:<age>", text));
    }
    return {id, age};
}

}  // namespace

void ExperimentConfig::validate() const {
    if (data.synthetic) {
        data.synthetic->validate();
    } else if (data.files.empty()) {
        throw ConfigError("config 'data.files' must list at least one embedding file");
    }
    if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0)) {
        throw ConfigError("config 'data.train_fraction' must lie strictly between 0 and 1");
    }
    train.validate();
    grid.validate();
    if (!(mds.smacof.tol > 0.0)) throw ConfigError("config 'mds.tol' must be positive");
    if (mds.max_items < 3) throw ConfigError("config 'mds.max_items' must be at least 3");
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
}

ExperimentConfig parse_experiment_config(std::string_view json_text, const std::filesystem::path& base_dir) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
    }
    ExperimentConfig cfg;
    cfg.grid = default_grid();
    Section s(root, "");
    std::string output_dir = cfg.output_dir.string();
    s.get("output_dir", output_dir);
    cfg.output_dir = resolve(base_dir, output_dir);
    s.get("jobs", cfg.jobs);
    read_data(s.child("data"), cfg.data, base_dir);
    read_train(s.child("train"), cfg.train);
    read_loss(s.child("loss"), cfg.train);
    read_grid(s.child("grid"), cfg.grid);
    read_mds(s.child("mds"), cfg.mds, base_dir);
    s.finish();
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open config file '{}'", path.string()));
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_experiment_config(buffer.str(), path.parent_path());
}

LoadedData load_data(const DataSettings& settings) {
    LoadedData out;
    if (settings.synthetic) {
        auto ds = generate_synthetic(*settings.synthetic);
        out.source = std::move(ds.source);
        out.target = std::move(ds.target);
        return out;
    }
    std::set<std::string> ids;
    std::optional<std::size_t> dim;
    for (const auto& path : settings.files) {
        for (auto& ex : load_embeddings(path, EmbeddingSchema{dim})) {
            if (!ids.insert(ex.id).second) {
                throw DataError(fmt::format("duplicate id '{}' in '{}'", ex.id, path.string()));
            }
            dim = ex.features.size();
            (ex.domain == Domain::Source ? out.source : out.target).push_back(std::move(ex));
        }
    }
    if (out.source.empty()) throw DataError("no source examples in the configured embedding files");
    return out;
}

void cmd_generate(const ExperimentConfig& config, std::ostream& out) {
    if (!config.data.synthetic) throw ConfigError("generate needs a 'data.synthetic' section");
    const auto ds = generate_synthetic(*config.data.synthetic);
    ensure_dir(config.output_dir);
    const auto source_path = config.output_dir / "source.csv";
    const auto target_path = config.output_dir / "target.csv";
    write_embeddings(source_path, ds.source);
    write_embeddings(target_path, ds.target);
    out << fmt::format("wrote {} source rows to {}\n", ds.source.size(), source_path.string());
    out << fmt::format("wrote {} target rows to {}\n", ds.target.size(), target_path.string());
    out << fmt::format("seed {}\n", config.data.synthetic->seed);
}

void cmd_train(const ExperimentConfig& config, std::ostream& out) {
    const auto loaded = load_data(config.data);
    const auto data = make_training_data(loaded.source, loaded.target, config.data.train_fraction, config.data.split_seed);
    const auto result = train(config.train, data);
    ensure_dir(config.output_dir);
    write_file(config.output_dir / "metrics.csv", [&](std::ostream& o) { write_metrics_csv(o, result.report); });
    write_file(config.output_dir / "metrics.txt", [&](std::ostream& o) { write_metrics_table(o, result.report); });
    write_file(config.output_dir / "checkpoint.txt", [&](std::ostream& o) { write_checkpoint(o, result.model); });
    write_summary_table(out, config.train, result.report);
}

void cmd_grid(const ExperimentConfig& config, std::ostream& out) {
    const auto loaded = load_data(config.data);
    const auto data = make_training_data(loaded.source, loaded.target, config.data.train_fraction, config.data.split_seed);
    const auto cells = run_experiment_grid(config.train, config.grid, data, config.jobs);
    ensure_dir(config.output_dir);
    write_file(config.output_dir / "grid.csv", [&](std::ostream& o) { write_grid_csv(o, cells); });
    write_file(config.output_dir / "grid.txt", [&](std::ostream& o) { write_grid_table(o, cells); });
    write_grid_table(out, cells);
}

void cmd_mds(const ExperimentConfig& config, std::ostream& out) {
    const auto& mds = config.mds;
    if (mds.checkpoints.empty()) throw ConfigError("mds needs at least one checkpoint");
    if (mds.anchors.size() != 2) throw ConfigError(fmt::format("mds needs exactly two anchors, got {}", mds.anchors.size()));
    const auto loaded = load_data(config.data);
    const auto& pool = mds.domain == Domain::Source ? loaded.source : loaded.target;
    std::vector<Example> items(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(pool.size(), mds.max_items)));
    if (items.size() < 3) throw DataError("mds needs at least three items");

    AnchorPair pair;
    std::array<double, 2> anchor_ages{};
    for (std::size_t k = 0; k < 2; ++k) {
        const Anchor anchor = parse_anchor(mds.anchors[k]);
        auto it = std::find_if(items.begin(), items.end(), [&](const Example& e) { return e.id == anchor.id; });
        if (it == items.end()) throw DataError(fmt::format("unknown anchor id '{}'", anchor.id));
        const std::size_t index = static_cast<std::size_t>(it - items.begin());
        (k == 0 ? pair.first : pair.second) = index;
        if (anchor.age) {
            anchor_ages[k] = *anchor.age;
        } else if (it->age) {
            anchor_ages[k] = *it->age;
        } else {
            throw DataError(fmt::format("anchor '{}' has no age; pass it as {}:<age>", anchor.id, anchor.id));
        }
    }
    std::vector<Vector> features;
    for (const auto& ex : items) features.push_back(ex.features);

    ensure_dir(config.output_dir);
    out << fmt::format("{:<48}  {:>10}  {:>6}\n", "checkpoint", "MAE", "items");
    for (std::size_t c = 0; c < mds.checkpoints.size(); ++c) {
        const auto model = load_checkpoint(mds.checkpoints[c]);
        if (model.mode != ModelMode::Pairwise) {
            throw ModeError(fmt::format("checkpoint '{}' is a single-mode model; mds needs a pairwise model",
                                        mds.checkpoints[c].string()));
        }
        if (model.feature_dim != features.front().size()) {
            throw ShapeError(fmt::format("checkpoint '{}' expects {} features, data has {}", mds.checkpoints[c].string(),
                                         model.feature_dim, features.front().size()));
        }
        const PairPredictor predictor = [&model](std::span<const double> a, std::span<const double> b) {
            return predict_pair(model, a, b).age_diff;
        };
        const auto d = build_dissimilarity(predictor, features);
        const auto emb = smacof_1d(d, mds.smacof);
        const auto ages = align_with_anchors(emb, pair, anchor_ages);

        double total = 0.0;
        std::size_t count = 0;
        bool all_labeled = true;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i == pair.first || i == pair.second) continue;
            if (!items[i].age) {
                all_labeled = false;
                continue;
            }
            total += std::abs(ages[i] - *items[i].age);
            ++count;
        }
        const std::string name = mds.checkpoints.size() == 1 ? "recovered_ages.csv" : fmt::format("recovered_ages_{}.csv", c);
        write_file(config.output_dir / name, [&](std::ostream& o) {
            o << "id,recovered_age,true_age,anchor\n";
            for (std::size_t i = 0; i < items.size(); ++i) {
                o << fmt::format("{},{:.6f},{},{}\n", items[i].id, ages[i],
                                 items[i].age ? fmt::format("{}", *items[i].age) : "",
                                 (i == pair.first || i == pair.second) ? 1 : 0);
            }
        });
        const std::string mae = all_labeled && count > 0 ? fmt::format("{:.4f}", total / static_cast<double>(count)) : "n/a";
        out << fmt::format("{:<48}  {:>10}  {:>6}\n", mds.checkpoints[c].string(), mae, items.size());
    }
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
    if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return kExitData;
    if (dynamic_cast<const DivergenceError*>(&e)) return kExitTraining;
    if (dynamic_cast<const ModeError*>(&e) || dynamic_cast<const DegenerateAnchorError*>(&e)) return kExitMds;
    return kExitInternal;
}

int run_cli(int argc, char** argv) { return run_cli(argc, argv, std::cout, std::cerr); }

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Domain adaptation experiments for regression on embeddings", "udareg"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::vector<std::string> checkpoints;
    std::vector<std::string> anchors;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON experiment config (defaults apply when omitted)");
        sub->add_option("-o,--out", out_dir, "Output directory (overrides output_dir)");
        sub->add_option("--seed", seed, "Seed override");
    };
    auto* generate = app.add_subcommand("generate", "Write synthetic source and target embedding files");
    auto* train_cmd = app.add_subcommand("train", "Train one configuration; write metrics and a checkpoint");
    auto* grid = app.add_subcommand("grid", "Train every cell of the configured grid; write a comparison table");
    auto* mds = app.add_subcommand("mds", "Recover absolute ages from a pairwise checkpoint");
    for (auto* sub : {generate, train_cmd, grid, mds}) add_common(sub);
    grid->add_option("-j,--jobs", jobs, "Grid cells trained in parallel")->check(CLI::PositiveNumber);
    mds->add_option("--checkpoint", checkpoints, "Pairwise checkpoint (repeatable)");
    mds->add_option("--anchor", anchors, "Anchor as <id> or <id>:<age> (give two)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        ExperimentConfig config = config_path.empty() ? parse_experiment_config("{}") : load_experiment_config(config_path);
        if (!out_dir.empty()) config.output_dir = out_dir;
        if (jobs) config.jobs = *jobs;
        if (!checkpoints.empty()) config.mds.checkpoints.assign(checkpoints.begin(), checkpoints.end());
        if (!anchors.empty()) config.mds.anchors = anchors;
        if (seed) {
            if (generate->parsed()) {
                if (config.data.synthetic) config.data.synthetic->seed = *seed;
            } else if (mds->parsed()) {
                config.mds.smacof.seed = *seed;
            } else {
                config.train.seed = *seed;
            }
        }
        config.validate();

        if (generate->parsed()) cmd_generate(config, out);
        if (train_cmd->parsed()) cmd_train(config, out);
        if (grid->parsed()) cmd_grid(config, out);
        if (mds->parsed()) cmd_mds(config, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kExitOk;
}

}  // namespace udareg
