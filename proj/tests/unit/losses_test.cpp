#include <cmath>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "gradcheck.hpp"
#include "udareg/error.hpp"
#include "udareg/losses.hpp"

namespace udareg {
namespace {

double gauss(std::span<const double> a, std::span<const double> b, double bw) {
    double sq = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sq += (a[k] - b[k]) * (a[k] - b[k]);
    return std::exp(-sq / (2.0 * bw * bw));
}

double brute_force_mmd(const std::vector<Vector>& s, const std::vector<Vector>& t, double bw) {
    double ss = 0.0, tt = 0.0, st = 0.0;
    for (const auto& a : s) {
        for (const auto& b : s) ss += gauss(a, b, bw);
    }
    for (const auto& a : t) {
        for (const auto& b : t) tt += gauss(a, b, bw);
    }
    for (const auto& a : s) {
        for (const auto& b : t) st += gauss(a, b, bw);
    }
    const double n = static_cast<double>(s.size()), m = static_cast<double>(t.size());
    return ss / (n * n) + tt / (m * m) - 2.0 * st / (n * m);
}

// f^T (D - W) f with an explicitly assembled Laplacian.
double laplacian_quadratic_form(const std::vector<Vector>& x, std::span<const double> f, double sigma) {
    const std::size_t n = x.size();
    Matrix lap(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double w = gauss(x[i], x[j], sigma);
            lap(i, j) -= w;
            lap(i, i) += w;
        }
    }
    double q = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) q += f[i] * lap(i, j) * f[j];
    }
    return q;
}

TEST(RegressionLoss, Examples) {
    EXPECT_EQ(regression_loss(Vector{5}, Vector{5}, RegressionNorm::L1).value, 0.0);
    EXPECT_DOUBLE_EQ(regression_loss(Vector{3, 7}, Vector{1, 4}, RegressionNorm::L1).value, 2.5);
    EXPECT_DOUBLE_EQ(regression_loss(Vector{2}, Vector{0}, RegressionNorm::L2).value, 4.0);
}

TEST(RegressionLoss, GradientsAndErrors) {
    const auto l1 = regression_loss(Vector{3, 1}, Vector{1, 4}, RegressionNorm::L1);
    EXPECT_EQ(l1.grad, (Vector{0.5, -0.5}));
    const auto l2 = regression_loss(Vector{3, 1}, Vector{1, 4}, RegressionNorm::L2);
    EXPECT_EQ(l2.grad, (Vector{2.0, -3.0}));
    EXPECT_EQ(regression_loss(Vector{1}, Vector{1}, RegressionNorm::L1).grad[0], 0.0);
    EXPECT_THROW(regression_loss(Vector{}, Vector{}, RegressionNorm::L1), ShapeError);
    EXPECT_THROW(regression_loss(Vector{1, 2}, Vector{1}, RegressionNorm::L1), ShapeError);
}

TEST(RankingLoss, Examples) {
    EXPECT_NEAR(ranking_loss(Vector{0.5}, Vector{0}).value, std::log(2.0), 1e-15);
    EXPECT_NEAR(ranking_loss(Vector{0.73}, Vector{3}).value, -std::log(0.73), 1e-15);
    EXPECT_NEAR(ranking_loss(Vector{0.8, 0.3}, Vector{2, -1}).value, 0.5 * (-std::log(0.8) - std::log(0.7)), 1e-15);
    EXPECT_NEAR(ranking_loss(Vector{0.8, 0.3}, Vector{2, -1}).value, 0.2899, 1e-4);
}

TEST(RankingLoss, TargetIsComplementary) {
    for (double d : {-5.0, -0.1, 0.0, 0.2, 7.0}) EXPECT_EQ(rank_target(d) + rank_target(-d), 1.0);
    EXPECT_EQ(rank_target(0.0), 0.5);
    EXPECT_EQ(rank_target(2.0), 1.0);
}

TEST(RankingLoss, RejectsProbabilitiesOutsideUnitInterval) {
    EXPECT_THROW(ranking_loss(Vector{1.5}, Vector{1}), DataError);
    EXPECT_THROW(ranking_loss(Vector{-0.1}, Vector{1}), DataError);
    EXPECT_TRUE(std::isfinite(ranking_loss(Vector{1.0}, Vector{-1}).value));
}

TEST(IdentityLoss, Examples) {
    EXPECT_EQ(identity_loss(Vector{4}, Vector{-4}, Vector{0}, Vector{0.9}, Vector{0.1}).value, 0.0);
    EXPECT_DOUBLE_EQ(identity_loss(Vector{0}, Vector{0}, Vector{1}, Vector{0.5}, Vector{0.5}).value, 1.0);
    EXPECT_NEAR(identity_loss(Vector{2}, Vector{-1}, Vector{0.5}, Vector{0.7}, Vector{0.6}).value, 1.8, 1e-15);
}

TEST(IdentityLoss, RejectsLengthMismatch) {
    EXPECT_THROW(identity_loss(Vector{1, 2}, Vector{1}, Vector{0}, Vector{0.5}, Vector{0.5}), ShapeError);
}

TEST(MmdLoss, HandValueAndIdenticalSamples) {
    const auto r = mmd_loss(std::vector<Vector>{{0.0}}, std::vector<Vector>{{1.0}}, KernelConfig::fixed(1.0));
    EXPECT_NEAR(r.value, 2.0 - 2.0 * std::exp(-0.5), 1e-15);
    EXPECT_NEAR(r.value, 0.7869, 1e-4);
    const std::vector<Vector> s{{1, 2}, {0.5, -1}, {3, 3}};
    EXPECT_NEAR(mmd_loss(s, s, KernelConfig::median()).value, 0.0, 1e-12);
}

TEST(MmdLoss, MatchesBruteForce) {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> size(1, 5), dim(1, 4);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = dim(rng);
        const auto s = testing::random_inputs(rng, size(rng), d);
        const auto t = testing::random_inputs(rng, size(rng), d, 1.5);
        const double bw = testing::random_vector(rng, 1, 0.3, 3.0)[0];
        const auto r = mmd_loss(s, t, KernelConfig::fixed(bw));
        EXPECT_NEAR(r.value, brute_force_mmd(s, t, bw), 1e-10);
        EXPECT_GE(r.value, 0.0);
    }
}

TEST(MmdLoss, MedianHeuristicAndFallback) {
    // Pooled points 0, 1, 3: distances {1, 3, 2}, median 2.
    const auto r = mmd_loss(std::vector<Vector>{{0.0}, {1.0}}, std::vector<Vector>{{3.0}}, KernelConfig::median());
    EXPECT_DOUBLE_EQ(r.bandwidth, 2.0);
    // Zero-variance pool falls back to 1.
    const auto z = mmd_loss(std::vector<Vector>{{2.0}}, std::vector<Vector>{{2.0}}, KernelConfig::median());
    EXPECT_EQ(z.bandwidth, 1.0);
    EXPECT_EQ(z.value, 0.0);
}

TEST(MmdLoss, Errors) {
    EXPECT_THROW(mmd_loss(std::vector<Vector>{}, std::vector<Vector>{{1.0}}, KernelConfig::median()), ShapeError);
    EXPECT_THROW(mmd_loss(std::vector<Vector>{{1.0}}, std::vector<Vector>{{1.0, 2.0}}, KernelConfig::median()),
                 ShapeError);
    EXPECT_THROW(mmd_loss(std::vector<Vector>{{1.0}}, std::vector<Vector>{{2.0}}, KernelConfig::fixed(0.0)),
                 ConfigError);
}

TEST(SmoothingLoss, Examples) {
    const std::vector<Vector> x{{0.3, 1.0}, {-2.0, 0.5}, {1.0, 1.0}};
    EXPECT_EQ(smoothing_loss(x, Vector{2, 2, 2}, 1.0).value, 0.0);
    const std::vector<Vector> twins{{1.0}, {1.0}};
    EXPECT_DOUBLE_EQ(smoothing_loss(twins, Vector{0, 2}, 0.7).value, 4.0);
    EXPECT_THROW(smoothing_loss(x, Vector{1, 2, 3}, 0.0), std::invalid_argument);
    EXPECT_THROW(smoothing_loss(x, Vector{1, 2}, 1.0), ShapeError);
}

TEST(SmoothingLoss, EqualsLaplacianQuadraticFormAndIsShiftInvariant) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = testing::random_inputs(rng, 4, 3);
        const auto f = testing::random_vector(rng, 4, -5, 5);
        const double sigma = testing::random_vector(rng, 1, 0.5, 2.0)[0];
        const double value = smoothing_loss(x, f, sigma).value;
        EXPECT_NEAR(value, laplacian_quadratic_form(x, f, sigma), 1e-9);
        Vector shifted = f;
        for (double& v : shifted) v += 3.7;
        EXPECT_NEAR(smoothing_loss(x, shifted, sigma).value, value, 1e-9);
    }
}

TEST(LossGradients, MatchFiniteDifferencesThroughRandomNetworks) {
    std::mt19937_64 rng(77);
    int cases = 0;
    while (cases < 15) {
        const auto spec = testing::random_spec(rng);
        const auto net = make_network(spec, rng);
        const std::size_t n = 3;
        const auto inputs = testing::random_inputs(rng, 3 * n, spec.input_dim);
        std::vector<Tape> tapes;
        for (const auto& x : inputs) tapes.push_back(forward(net, x).tape);
        if (!testing::away_from_kinks(spec, tapes, 1e-3)) continue;
        for (const auto& term : testing::loss_terms(rng, n, spec.output_dim())) {
            const auto r = testing::check_network_loss(net, inputs, term.loss);
            EXPECT_LT(r.max_rel_error, 1e-4) << term.name;
        }
        ++cases;
    }
}

TEST(CompositeLoss, AllWeightsZeroAndMatchingPredictions) {
    CompositeInputs in;
    in.reg_pred = {1.0, 2.0};
    in.reg_target = {1.0, 2.0};
    EXPECT_EQ(composite_loss(in, CompositeLossConfig{}).total, 0.0);
}

TEST(CompositeLoss, SingleAdversarialTermPassesThrough) {
    CompositeInputs in;
    in.reg_pred = {1.0};
    in.reg_target = {1.0};
    in.domain_pred = {0.2, 0.6};
    in.domain_label = {0.0, 1.0};
    CompositeLossConfig cfg;
    cfg.gamma = 1.0;
    cfg.adaptation = Adaptation::Adversarial;
    const double v = binary_cross_entropy(in.domain_pred, in.domain_label).value;
    EXPECT_DOUBLE_EQ(composite_loss(in, cfg).total, v);
}

TEST(CompositeLoss, WeightedSumOfIndependentTerms) {
    CompositeInputs in;
    in.reg_pred = {1.5, -0.5};
    in.reg_target = {1.0, 0.5};
    in.rank_pred = {0.8, 0.4};
    in.rank_diff = {2.0, -1.0};
    in.domain_pred = {0.3, 0.6, 0.9};
    in.domain_label = {0.0, 1.0, 1.0};
    in.identity = {{Vector{2}, Vector{-1}, Vector{0.5}, Vector{0.7}, Vector{0.6}}};
    in.smooth_feats = stack_rows({{0.0}, {1.0}, {0.5}});
    in.smooth_preds = {1.0, 3.0, -1.0};
    in.smooth_kernel = KernelConfig::fixed(1.0);
    CompositeLossConfig cfg;
    cfg.alpha = 0.3;
    cfg.beta = 0.1;
    cfg.gamma = 0.1;
    cfg.sigma_smooth = 0.01;
    cfg.adaptation = Adaptation::Adversarial;

    const double reg = 0.5 * (0.5 + 1.0);
    const double rank = 0.5 * (-std::log(0.8) - std::log(0.6));
    const double adv = -(std::log(0.7) + std::log(0.6) + std::log(0.9)) / 3.0;
    const double id = 1.8;
    const double w01 = std::exp(-0.5), w02 = std::exp(-0.125), w12 = std::exp(-0.125);
    const double smooth = w01 * 4.0 + w02 * 4.0 + w12 * 16.0;
    const double expected = reg + 0.3 * rank + 0.1 * adv + 0.1 * id + 0.01 * smooth;

    const auto r = composite_loss(in, cfg);
    EXPECT_NEAR(r.total, expected, 1e-12);
    EXPECT_NEAR(r.terms.regression, reg, 1e-15);
    EXPECT_NEAR(r.terms.rank, rank, 1e-15);
    EXPECT_NEAR(r.terms.adaptation, adv, 1e-15);
    EXPECT_NEAR(r.terms.identity, id, 1e-15);
    EXPECT_NEAR(r.terms.smoothing, smooth, 1e-12);
}

TEST(CompositeLoss, MissingInputsForEnabledTerms) {
    CompositeInputs in;
    in.reg_pred = {1.0};
    in.reg_target = {1.0};
    CompositeLossConfig rank;
    rank.alpha = 1.0;
    EXPECT_THROW(composite_loss(in, rank), MissingInputError);
    CompositeLossConfig adv;
    adv.gamma = 1.0;
    adv.adaptation = Adaptation::Adversarial;
    EXPECT_THROW(composite_loss(in, adv), MissingInputError);
    adv.adaptation = Adaptation::MMD;
    EXPECT_THROW(composite_loss(in, adv), MissingInputError);
    CompositeLossConfig id;
    id.beta = 1.0;
    EXPECT_THROW(composite_loss(in, id), MissingInputError);
    CompositeLossConfig smooth;
    smooth.sigma_smooth = 1.0;
    EXPECT_THROW(composite_loss(in, smooth), MissingInputError);
    // Adaptation mode None ignores gamma.
    CompositeLossConfig none;
    none.gamma = 1.0;
    EXPECT_EQ(composite_loss(in, none).total, 0.0);
}

TEST(CompositeLoss, ConfigValidation) {
    CompositeLossConfig cfg;
    cfg.alpha = -0.1;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.alpha = NAN;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_EQ(parse_regression_norm("l2"), RegressionNorm::L2);
    EXPECT_EQ(parse_adaptation("dann"), Adaptation::Adversarial);
    EXPECT_THROW(parse_adaptation("coral"), ConfigError);
}

}  // namespace
}  // namespace udareg
