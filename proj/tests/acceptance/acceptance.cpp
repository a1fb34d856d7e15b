// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "gradcheck.hpp"
#include "udareg/cli.hpp"
#include "udareg/data.hpp"
#include "udareg/diffcore.hpp"
#include "udareg/losses.hpp"
#include "udareg/mds.hpp"
#include "udareg/model.hpp"
#include "udareg/trainer.hpp"

namespace {

using namespace udareg;
namespace fs = std::filesystem;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void criterion(const std::string& id, const std::string& name, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome r;
    try {
        r = check();
    } catch (const std::exception& e) {
        r = {false, fmt::format("threw: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!r.pass) ++g_failures;
    fmt::print("{} {:<3} {:<28} {} [{:.1f} s]\n", r.pass ? "PASS" : "FAIL", id, name, r.detail, secs);
    std::fflush(stdout);
}

double elapsed_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

double gauss(std::span<const double> a, std::span<const double> b, double bw) {
    double sq = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sq += (a[k] - b[k]) * (a[k] - b[k]);
    return std::exp(-sq / (2.0 * bw * bw));
}

// ---- 1 -------------------------------------------------------------------

Outcome gradient_exactness() {
    constexpr double kTol = 1e-4;
    constexpr double kBudget = 30.0;
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(2024);
    std::map<std::string, double> worst;
    int cases = 0;
    std::size_t checked = 0;
    while (cases < 100) {
        const auto spec = testing::random_spec(rng);
        const auto net = make_network(spec, rng);
        std::uniform_int_distribution<std::size_t> batch(2, 4);
        const std::size_t n = batch(rng);
        const auto inputs = testing::random_inputs(rng, 3 * n, spec.input_dim);
        std::vector<Tape> tapes;
        for (const auto& x : inputs) tapes.push_back(forward(net, x).tape);
        if (!testing::away_from_kinks(spec, tapes, 1e-3)) continue;
        for (const auto& term : testing::loss_terms(rng, n, spec.output_dim())) {
            const auto r = testing::check_network_loss(net, inputs, term.loss);
            worst[term.name] = std::max(worst[term.name], r.max_rel_error);
            checked += r.checked;
        }
        ++cases;
    }
    const double secs = elapsed_since(start);
    double max_err = 0.0;
    std::string per_term;
    for (const auto& [name, err] : worst) {
        max_err = std::max(max_err, err);
        per_term += fmt::format(" {}={:.1e}", name, err);
    }
    return {max_err < kTol && secs < kBudget,
            fmt::format("max rel err {:.2e} < {:.0e} over {} cases, {} gradients, {:.1f} s < {:.0f} s;{}", max_err, kTol,
                        cases, checked, secs, kBudget, per_term)};
}

// ---- 2 -------------------------------------------------------------------

Outcome mmd_oracle() {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<std::size_t> size(1, 5), dim(1, 4);
    double max_diff = 0.0, max_self = 0.0, min_value = INFINITY;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = dim(rng);
        const auto s = testing::random_inputs(rng, size(rng), d);
        const auto t = testing::random_inputs(rng, size(rng), d, 2.0);
        for (const auto& kernel : {KernelConfig::median(), KernelConfig::fixed(testing::random_vector(rng, 1, 0.3, 3)[0])}) {
            const auto r = mmd_loss(s, t, kernel);
            double ss = 0.0, tt = 0.0, st = 0.0;
            for (const auto& a : s) {
                for (const auto& b : s) ss += gauss(a, b, r.bandwidth);
            }
            for (const auto& a : t) {
                for (const auto& b : t) tt += gauss(a, b, r.bandwidth);
            }
            for (const auto& a : s) {
                for (const auto& b : t) st += gauss(a, b, r.bandwidth);
            }
            const double ns = static_cast<double>(s.size()), nt = static_cast<double>(t.size());
            const double brute = ss / (ns * ns) + tt / (nt * nt) - 2.0 * st / (ns * nt);
            max_diff = std::max(max_diff, std::abs(r.value - brute));
            min_value = std::min(min_value, r.value);
            max_self = std::max(max_self, std::abs(mmd_loss(s, s, kernel).value));
        }
    }
    return {max_diff <= 1e-10 && max_self <= 1e-12 && min_value >= 0.0,
            fmt::format("|MMD - brute force| max {:.1e} <= 1e-10, |MMD(S,S)| max {:.1e} <= 1e-12, min MMD {:.2e} >= 0",
                        max_diff, max_self, min_value)};
}

// ---- 3 -------------------------------------------------------------------

Outcome laplacian_identity() {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<std::size_t> size(1, 16), dim(1, 4);
    double max_diff = 0.0, max_shift = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = size(rng);
        const auto x = testing::random_inputs(rng, n, dim(rng));
        const auto f = testing::random_vector(rng, n, -1.0, 1.0);
        const double sigma = testing::random_vector(rng, 1, 0.3, 2.0)[0];
        Matrix lap(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double w = gauss(x[i], x[j], sigma);
                lap(i, j) -= w;
                lap(i, i) += w;
            }
        }
        double quad = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) quad += f[i] * lap(i, j) * f[j];
        }
        const double value = smoothing_loss(x, f, sigma).value;
        Vector shifted = f;
        const double c = testing::random_vector(rng, 1, -10.0, 10.0)[0];
        for (double& v : shifted) v += c;
        max_diff = std::max(max_diff, std::abs(value - quad));
        max_shift = std::max(max_shift, std::abs(smoothing_loss(x, shifted, sigma).value - value));
    }
    return {max_diff <= 1e-9 && max_shift <= 1e-9,
            fmt::format("|L - f'(D-W)f| max {:.1e} <= 1e-9, shift change max {:.1e} <= 1e-9 over 50 batches", max_diff,
                        max_shift)};
}

// ---- 4 -------------------------------------------------------------------

Outcome smacof_properties() {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(51);
    std::uniform_int_distribution<std::size_t> size(2, 12);
    std::size_t increases = 0, iterations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = size(rng);
        Matrix d(n, n);
        std::uniform_real_distribution<double> u(0.1, 10.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) d(i, j) = d(j, i) = u(rng);
        }
        const auto emb = smacof_1d(DissimilarityMatrix(d), {500, 1e-12, static_cast<std::uint64_t>(trial)});
        for (std::size_t k = 1; k < emb.stress_history.size(); ++k) {
            if (emb.stress_history[k] > emb.stress_history[k - 1]) ++increases;
        }
        iterations += emb.stress_history.size();
    }
    double worst_stress = 0.0, worst_gap = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = std::max<std::size_t>(3, size(rng));
        const auto x = testing::random_vector(rng, n, -50.0, 50.0);
        const auto emb = smacof_1d(DissimilarityMatrix::from_points(x));
        worst_stress = std::max(worst_stress, emb.final_stress);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const double gap = std::abs(std::abs(emb.coords[i] - emb.coords[j]) - std::abs(x[i] - x[j]));
                worst_gap = std::max(worst_gap, gap);
            }
        }
    }
    const double secs = elapsed_since(start);
    return {increases == 0 && worst_stress < 1e-6 && worst_gap <= 1e-3 && secs < 10.0,
            fmt::format("{} stress increases in {} iterations (100 matrices); 1-D sets: max stress {:.1e} < 1e-6, "
                        "max gap error {:.1e} <= 1e-3; {:.1f} s < 10 s",
                        increases, iterations, worst_stress, worst_gap, secs)};
}

// ---- 5 -------------------------------------------------------------------

Outcome mds_end_to_end() {
    SyntheticConfig cfg;
    cfg.n_source = 4;
    cfg.n_target = 20;
    const auto ds = generate_synthetic(cfg);
    std::vector<Vector> items;
    Vector ages;
    std::map<Vector, double> lookup;
    for (const auto& ex : ds.target) {
        items.push_back(ex.features);
        ages.push_back(*ex.age);
        lookup[ex.features] = *ex.age;
    }
    const PairPredictor oracle = [&](std::span<const double> a, std::span<const double> b) {
        return lookup.at(Vector(a.begin(), a.end())) - lookup.at(Vector(b.begin(), b.end()));
    };
    const auto r = recover_ages(oracle, items, ages, {0, 1});
    return {r.mae < 1e-3, fmt::format("recovered-age MAE {:.2e} years < 1e-3 (n = 20, anchors 0 and 1)", r.mae)};
}

// ---- 6 -------------------------------------------------------------------

// Trunk gradients when the discriminator's input gradient passes through a
// reversal layer of strength lambda, or straight through when lambda is 0.
BackwardResult trunk_backward(const Network& trunk, const Network& disc, std::span<const double> x, double lambda) {
    const auto t = forward(trunk, x);
    const auto d = forward(disc, t.output);
    const auto dg = backward(disc, d.tape, Vector(d.output.size(), 1.0));
    const Vector g = lambda == 0.0 ? dg.input_grad : reverse_gradient(dg.input_grad, lambda);
    return backward(trunk, t.tape, g);
}

// The reversal layer itself is compared bitwise. Downstream trunk gradients
// are bitwise for lambda = 1; for lambda = 0.1 scaling before and after the
// chain's sums rounds differently, so they are compared to 1e-14 relative
// to the largest gradient magnitude.
Outcome gradient_reversal() {
    constexpr double kChainTol = 1e-14;
    std::mt19937_64 rng(61);
    std::size_t layer_mismatch = 0, layer_total = 0;
    std::size_t unit_mismatch = 0, unit_total = 0;
    std::size_t tenth_inexact = 0, tenth_total = 0;
    double tenth_rel = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto trunk = make_network(testing::random_spec(rng), rng);
        NetworkSpec ds = testing::random_spec(rng);
        ds.input_dim = trunk.spec.output_dim();
        const auto disc = make_network(ds, rng);
        const auto x = testing::random_inputs(rng, 1, trunk.spec.input_dim)[0];
        const auto plain = trunk_backward(trunk, disc, x, 0.0);
        Vector plain_flat = plain.param_grads.flatten();
        plain_flat.insert(plain_flat.end(), plain.input_grad.begin(), plain.input_grad.end());
        for (double lambda : {0.1, 1.0}) {
            const auto g = testing::random_vector(rng, 6, -3, 3);
            const auto rg = reverse_gradient(g, lambda);
            for (std::size_t k = 0; k < g.size(); ++k) layer_mismatch += rg[k] != -lambda * g[k];
            layer_total += g.size();

            const auto reversed = trunk_backward(trunk, disc, x, lambda);
            Vector flat = reversed.param_grads.flatten();
            flat.insert(flat.end(), reversed.input_grad.begin(), reversed.input_grad.end());
            double norm = std::numeric_limits<double>::min();
            for (double v : plain_flat) norm = std::max(norm, std::abs(lambda * v));
            for (std::size_t k = 0; k < flat.size(); ++k) {
                const double expected = -lambda * plain_flat[k];
                if (lambda == 1.0) {
                    unit_mismatch += flat[k] != expected;
                    ++unit_total;
                } else {
                    tenth_inexact += flat[k] != expected;
                    tenth_rel = std::max(tenth_rel, std::abs(flat[k] - expected) / norm);
                    ++tenth_total;
                }
            }
        }
    }
    return {layer_mismatch == 0 && unit_mismatch == 0 && tenth_rel <= kChainTol,
            fmt::format("layer: {}/{} outputs differ from -lambda*g; trunk grads lambda=1: {}/{} differ bitwise; "
                        "lambda=0.1: max norm-relative diff {:.1e} <= {:.0e} ({}/{} not bitwise)",
                        layer_mismatch, layer_total, unit_mismatch, unit_total, tenth_rel, kChainTol, tenth_inexact,
                        tenth_total)};
}

// ---- 7 -------------------------------------------------------------------

struct Trajectory {
    std::vector<Vector> params;
    std::vector<std::array<double, 3>> metrics;

    bool operator==(const Trajectory&) const = default;
};

Vector all_params(const ModelAssembly& m) {
    Vector out;
    auto append = [&](const Parameters& p) {
        const auto f = p.flatten();
        out.insert(out.end(), f.begin(), f.end());
    };
    append(m.trunk.params);
    append(m.regression.params);
    if (m.rank_head) append(m.rank_head->params);
    if (m.discriminator) append(m.discriminator->params);
    return out;
}

Trajectory trajectory(const TrainConfig& cfg, const TrainingData& data) {
    Trajectory t;
    const auto r = train(cfg, data, [&](std::size_t, const ModelAssembly& m) { t.params.push_back(all_params(m)); });
    for (const auto& row : r.report.rows) t.metrics.push_back({row.train_loss, row.source_train_mae, row.source_val_mae});
    t.params.push_back(all_params(r.model));
    return t;
}

Outcome unsupervised_contract() {
    SyntheticConfig s;
    s.n_source = 300;
    s.n_target = 300;
    const auto ds = generate_synthetic(s);
    const auto labeled = make_training_data(ds.source, ds.target, 0.8, 0);
    auto zeroed = labeled;
    for (auto& ex : zeroed.target) ex.age = 0.0;
    auto removed = labeled;
    for (auto& ex : removed.target) ex.age.reset();

    std::vector<TrainConfig> configs;
    for (Variant v : {Variant::DANN, Variant::MMD, Variant::PairwiseDANN, Variant::PairwiseMMD}) {
        TrainConfig c;
        c.variant = v;
        c.epochs = 5;
        c.loss.gamma = 0.3;
        if (mode_of(v) == ModelMode::Pairwise) {
            c.loss.alpha = 0.1;
            c.loss.beta = 0.1;
            c.loss.sigma_smooth = 0.01;
        }
        configs.push_back(c);
    }
    std::size_t identical = 0, runs = 0;
    std::string names;
    for (const auto& c : configs) {
        const auto base = trajectory(c, labeled);
        identical += base == trajectory(c, zeroed);
        identical += base == trajectory(c, removed);
        runs += 2;
        names += fmt::format(" {}", to_string(c.variant));
    }
    return {identical == runs,
            fmt::format("{}/{} trajectories bit-identical over 5 epochs with target labels zeroed or removed;{}",
                        identical, runs, names)};
}

// ---- 8 -------------------------------------------------------------------

TrainingData default_data() {
    const auto ds = generate_synthetic(SyntheticConfig{});
    return make_training_data(ds.source, ds.target, 0.8, 0);
}

std::string pinned(double got, double pin) {
    return std::abs(got - pin) <= 5e-5 ? fmt::format("{:.4f}", got) : fmt::format("{:.4f} (pinned {:.4f})", got, pin);
}

// Values pinned from the first verified run (seed 1, default synthetic data).
constexpr double kPin8aTarget = 26.5172;
constexpr double kPin8aVal = 0.4281;
constexpr double kPin8bRank = 0.7355;
constexpr double kPin8bPlain = 0.7337;
constexpr double kPin8cLow = 0.7743;
constexpr double kPin8cHigh = 0.9741;

Outcome trend_domain_gap(const TrainingData& data) {
    TrainConfig c;
    const auto best = *train(c, data).report.best();
    return {*best.target_mae > best.source_val_mae,
            fmt::format("source_only target MAE {} > source-val MAE {}", pinned(*best.target_mae, kPin8aTarget),
                        pinned(best.source_val_mae, kPin8aVal))};
}

Outcome trend_rank(const TrainingData& data) {
    TrainConfig c;
    c.variant = Variant::PairwiseSourceOnly;
    c.loss.alpha = 0.1;
    const double with_rank = train(c, data).report.best()->source_val_mae;
    c.loss.alpha = 0.0;
    const double without = train(c, data).report.best()->source_val_mae;
    return {with_rank <= without, fmt::format("pairwise source-val MAE with rank (alpha 0.1) {} <= without {}",
                                              pinned(with_rank, kPin8bRank), pinned(without, kPin8bPlain))};
}

Outcome trend_dann_gamma(const TrainingData& data) {
    TrainConfig c;
    c.variant = Variant::DANN;
    c.pretrain_epochs = 10;
    c.loss.gamma = 0.1;
    const double low = train(c, data).report.best()->source_val_mae;
    c.loss.gamma = 1.0;
    const double high = train(c, data).report.best()->source_val_mae;
    return {high > low, fmt::format("dann source-val MAE gamma 1: {} > gamma 0.1: {}", pinned(high, kPin8cHigh),
                                    pinned(low, kPin8cLow))};
}

// ---- shift properties ------------------------------------------------------

TrainingData shifted_data(double shift) {
    SyntheticConfig s;
    s.shift_strength = shift;
    const auto ds = generate_synthetic(s);
    return make_training_data(ds.source, ds.target, 0.8, 0);
}

constexpr double kPinGapTarget = 32.6058;
constexpr double kPinGapVal = 0.4281;
constexpr double kPinNoShiftBase = 0.4297;

Outcome strong_shift_gap() {
    const auto best = *train(TrainConfig{}, shifted_data(2.0)).report.best();
    return {*best.target_mae > best.source_val_mae,
            fmt::format("shift 2.0 source_only target MAE {} > source-val MAE {}",
                        pinned(*best.target_mae, kPinGapTarget), pinned(best.source_val_mae, kPinGapVal))};
}

// Adapted runs use the same pretrain-then-adapt schedule as 8c.
Outcome no_shift_band() {
    const auto data = shifted_data(0.0);
    const double base = *train(TrainConfig{}, data).report.best()->target_mae;
    double worst = 0.0;
    std::string detail = fmt::format("source_only target MAE {};", pinned(base, kPinNoShiftBase));
    for (Variant v : {Variant::DANN, Variant::MMD}) {
        for (double g : {0.1, 0.3}) {
            TrainConfig c;
            c.variant = v;
            c.pretrain_epochs = 10;
            c.loss.gamma = g;
            const double mae = *train(c, data).report.best()->target_mae;
            const double rel = std::abs(mae - base) / base;
            worst = std::max(worst, rel);
            detail += fmt::format(" {} gamma {}: {:.4f} ({:+.1f}%);", to_string(v), g, mae, 100.0 * (mae - base) / base);
        }
    }
    return {worst < 0.2, fmt::format("{} max relative change {:.1f}% < 20%", detail, 100.0 * worst)};
}

// ---- 9 -------------------------------------------------------------------

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Outcome identity_property() {
    std::mt19937_64 rng(91);
    double max_zero = 0.0, min_violation = INFINITY;
    for (int trial = 0; trial < 100; ++trial) {
        NetworkSpec spec = testing::random_spec(rng);
        spec.layer_widths.back() = 1;
        const auto g = make_network(spec, rng);
        const std::size_t n = 1 + trial % 8;
        const auto a = testing::random_inputs(rng, n, spec.input_dim);
        const auto b = testing::random_inputs(rng, n, spec.input_dim);
        // f1(A, B) = g(A) - g(B) + c, f2 = sigmoid(f1); antisymmetric iff c = 0.
        auto batch = [&](double c) {
            Vector ab(n), ba(n), aa(n), pab(n), pba(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double ga = forward(g, a[i]).output[0];
                const double gb = forward(g, b[i]).output[0];
                ab[i] = ga - gb + c;
                ba[i] = gb - ga + c;
                aa[i] = ga - ga + c;
                pab[i] = sigmoid(ab[i]);
                pba[i] = sigmoid(ba[i]);
            }
            return identity_loss(ab, ba, aa, pab, pba).value;
        };
        max_zero = std::max(max_zero, std::abs(batch(0.0)));
        double c = testing::random_vector(rng, 1, 0.1, 2.0)[0];
        if (trial % 2) c = -c;
        min_violation = std::min(min_violation, batch(c));
    }
    return {max_zero <= 1e-12 && min_violation > 0.0,
            fmt::format("antisymmetric predictor loss max {:.1e} <= 1e-12; violating (|f1(A,A)| >= 0.1) loss min {:.3f} > 0",
                        max_zero, min_violation)};
}

// ---- 10 ------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome train_determinism() {
    const auto dir = fs::temp_directory_path() / "udareg_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto cfg = dir / "config.json";
    std::ofstream(cfg) << R"({"data": {"synthetic": {"n_source": 400, "n_target": 400}},
        "train": {"variant": "pairwise_dann", "epochs": 5},
        "loss": {"alpha": 0.1, "beta": 0.1, "gamma": 0.3, "sigma_smooth": 0.01}})";
    std::vector<std::string> files{"metrics.csv", "metrics.txt", "checkpoint.txt"};
    std::vector<std::string> outputs[2];
    for (int run = 0; run < 2; ++run) {
        const auto out = dir / fmt::format("run{}", run);
        std::vector<std::string> args{"udareg", "train", "-c", cfg.string(), "-o", out.string()};
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        std::ostringstream sout, serr;
        const int code = run_cli(static_cast<int>(argv.size()), argv.data(), sout, serr);
        if (code != 0) return {false, fmt::format("train exited {}: {}", code, serr.str())};
        for (const auto& f : files) outputs[run].push_back(slurp(out / f));
    }
    fs::remove_all(dir);
    std::size_t same = 0;
    for (std::size_t k = 0; k < files.size(); ++k) same += outputs[0][k] == outputs[1][k] && !outputs[0][k].empty();
    return {same == files.size(),
            fmt::format("{}/{} output files byte-identical across two train runs (metrics.csv, metrics.txt, checkpoint.txt)",
                        same, files.size())};
}

}  // namespace

int main() {
    criterion("1", "gradient exactness", gradient_exactness);
    criterion("2", "mmd oracle", mmd_oracle);
    criterion("3", "laplacian identity", laplacian_identity);
    criterion("4", "smacof", smacof_properties);
    criterion("5", "mds end-to-end", mds_end_to_end);
    criterion("6", "gradient reversal", gradient_reversal);
    criterion("7", "unsupervised contract", unsupervised_contract);

    const auto trend_start = std::chrono::steady_clock::now();
    const auto data = default_data();
    criterion("8a", "trend: domain gap", [&] { return trend_domain_gap(data); });
    criterion("8b", "trend: rank term", [&] { return trend_rank(data); });
    criterion("8c", "trend: dann gamma", [&] { return trend_dann_gamma(data); });
    const double trend_secs = elapsed_since(trend_start);
    criterion("8", "trend runtime", [&] {
        return Outcome{trend_secs < 300.0, fmt::format("8a-8c took {:.1f} s < 300 s", trend_secs)};
    });

    criterion("S1", "trend: strong shift gap", strong_shift_gap);
    criterion("S2", "no-shift sanity band", no_shift_band);

    criterion("9", "identity loss", identity_property);
    criterion("10", "determinism", train_determinism);

    fmt::print("{}\n", g_failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", g_failures));
    return g_failures == 0 ? 0 : 1;
}
