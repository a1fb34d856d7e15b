#include "udareg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include <fmt/format.h>

#include "udareg/kernels.hpp"

namespace udareg {

namespace {

constexpr double kProbClamp = 1e-7;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void require_same_length(std::size_t a, std::size_t b, std::string_view what) {
    if (a != b) throw ShapeError(fmt::format("{}: lengths {} and {} differ", what, a, b));
}

Matrix concat_rows(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
    return out;
}

}  // namespace

std::string_view to_string(RegressionNorm n) { return n == RegressionNorm::L1 ? "l1" : "l2"; }

std::string_view to_string(Adaptation a) {
    switch (a) {
        case Adaptation::None: return "none";
        case Adaptation::Adversarial: return "adversarial";
        case Adaptation::MMD: return "mmd";
    }
    return "none";
}

RegressionNorm parse_regression_norm(std::string_view s) {
    if (s == "l1" || s == "L1") return RegressionNorm::L1;
    if (s == "l2" || s == "L2") return RegressionNorm::L2;
    throw ConfigError(fmt::format("unknown regression norm '{}' (expected l1 or l2)", s));
}

Adaptation parse_adaptation(std::string_view s) {
    if (s == "none") return Adaptation::None;
    if (s == "adversarial" || s == "dann") return Adaptation::Adversarial;
    if (s == "mmd") return Adaptation::MMD;
    throw ConfigError(fmt::format("unknown adaptation '{}'", s));
}

void CompositeLossConfig::validate() const {
    for (auto [name, w] : {std::pair{"alpha", alpha}, {"beta", beta}, {"gamma", gamma}, {"sigma_smooth", sigma_smooth}}) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError(fmt::format("loss weight {} must be finite and >= 0", name));
    }
}

void KernelConfig::validate() const {
    if (bandwidth && !(*bandwidth > 0.0 && std::isfinite(*bandwidth))) {
        throw ConfigError("kernel bandwidth must be positive");
    }
}

LossGrad regression_loss(std::span<const double> pred, std::span<const double> target, RegressionNorm norm) {
    require_same_length(pred.size(), target.size(), "regression_loss");
    if (pred.empty()) throw ShapeError("regression_loss: empty batch");
    const double n = static_cast<double>(pred.size());
    LossGrad out;
    out.grad.resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred[i] - target[i];
        if (norm == RegressionNorm::L1) {
            out.value += std::abs(r);
            out.grad[i] = sign(r) / n;
        } else {
            out.value += r * r;
            out.grad[i] = 2.0 * r / n;
        }
    }
    out.value /= n;
    return out;
}

double rank_target(double diff) {
    if (diff > 0.0) return 1.0;
    if (diff < 0.0) return 0.0;
    return 0.5;
}

LossGrad binary_cross_entropy(std::span<const double> prob, std::span<const double> labels) {
    require_same_length(prob.size(), labels.size(), "binary_cross_entropy");
    if (prob.empty()) throw ShapeError("binary_cross_entropy: empty batch");
    const double n = static_cast<double>(prob.size());
    LossGrad out;
    out.grad.resize(prob.size());
    for (std::size_t i = 0; i < prob.size(); ++i) {
        if (!(prob[i] >= 0.0 && prob[i] <= 1.0)) {
            throw DataError(fmt::format("binary_cross_entropy: probability {} at index {} is outside [0, 1]", prob[i], i));
        }
        const double p = std::clamp(prob[i], kProbClamp, 1.0 - kProbClamp);
        const double t = labels[i];
        out.value -= t * std::log(p) + (1.0 - t) * std::log1p(-p);
        out.grad[i] = (-t / p + (1.0 - t) / (1.0 - p)) / n;
    }
    out.value /= n;
    return out;
}

LossGrad ranking_loss(std::span<const double> rank_pred, std::span<const double> age_diff) {
    require_same_length(rank_pred.size(), age_diff.size(), "ranking_loss");
    Vector targets(age_diff.size());
    std::transform(age_diff.begin(), age_diff.end(), targets.begin(), rank_target);
    return binary_cross_entropy(rank_pred, targets);
}

IdentityLossResult identity_loss(std::span<const double> f1_ab, std::span<const double> f1_ba,
                                 std::span<const double> f1_aa, std::span<const double> f2_ab,
                                 std::span<const double> f2_ba) {
    const std::size_t n = f1_ab.size();
    for (std::size_t len : {f1_ba.size(), f1_aa.size(), f2_ab.size(), f2_ba.size()}) {
        require_same_length(n, len, "identity_loss");
    }
    IdentityLossResult out;
    auto& g = out.grad;
    g.f1_ab.assign(n, 0.0);
    g.f1_ba.assign(n, 0.0);
    g.f1_aa.assign(n, 0.0);
    g.f2_ab.assign(n, 0.0);
    g.f2_ba.assign(n, 0.0);
    if (n == 0) return out;

    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double self = f1_aa[i];
        const double anti = f1_ab[i] + f1_ba[i];
        const double comp = f2_ab[i] + f2_ba[i] - 1.0;
        out.value += std::abs(self) + std::abs(anti) + std::abs(comp);
        g.f1_aa[i] = sign(self) * inv_n;
        g.f1_ab[i] = g.f1_ba[i] = sign(anti) * inv_n;
        g.f2_ab[i] = g.f2_ba[i] = sign(comp) * inv_n;
    }
    out.value *= inv_n;
    return out;
}

IdentityLossResult identity_loss(const IdentityBatch& b) {
    return identity_loss(b.f1_ab, b.f1_ba, b.f1_aa, b.f2_ab, b.f2_ba);
}

double median_heuristic_bandwidth(const Matrix& pooled) {
    Vector dist = kernels::pairwise_distances(pooled);
    if (dist.empty()) return 1.0;
    const std::size_t mid = dist.size() / 2;
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
    double median = dist[mid];
    if (dist.size() % 2 == 0) {
        const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
        median = 0.5 * (median + lower);
    }
    return median > 0.0 && std::isfinite(median) ? median : 1.0;
}

double resolve_bandwidth(const KernelConfig& kernel, const Matrix& a, const Matrix& b) {
    kernel.validate();
    if (kernel.bandwidth) return *kernel.bandwidth;
    if (b.rows == 0) return median_heuristic_bandwidth(a);
    return median_heuristic_bandwidth(concat_rows(a, b));
}

MmdResult mmd_loss(const Matrix& source, const Matrix& target, const KernelConfig& kernel) {
    if (source.rows == 0 || target.rows == 0) throw ShapeError("mmd_loss: both samples must be nonempty");
    if (source.cols != target.cols) throw ShapeError("mmd_loss: source and target feature dimensions differ");

    MmdResult out;
    out.bandwidth = resolve_bandwidth(kernel, source, target);
    const double n = static_cast<double>(source.rows);
    const double m = static_cast<double>(target.rows);

    const auto ss = kernels::gaussian_cross_sum(source, source, out.bandwidth, true);
    const auto tt = kernels::gaussian_cross_sum(target, target, out.bandwidth, true);
    const auto st = kernels::gaussian_cross_sum(source, target, out.bandwidth, true);

    const double value = ss.sum / (n * n) + tt.sum / (m * m) - 2.0 * st.sum / (n * m);
    out.value = std::max(0.0, value);

    out.grad_source = Matrix(source.rows, source.cols);
    out.grad_target = Matrix(target.rows, target.cols);
    for (std::size_t k = 0; k < out.grad_source.data.size(); ++k) {
        out.grad_source.data[k] = (ss.grad_a.data[k] + ss.grad_b.data[k]) / (n * n) - 2.0 * st.grad_a.data[k] / (n * m);
    }
    for (std::size_t k = 0; k < out.grad_target.data.size(); ++k) {
        out.grad_target.data[k] = (tt.grad_a.data[k] + tt.grad_b.data[k]) / (m * m) - 2.0 * st.grad_b.data[k] / (n * m);
    }
    return out;
}

MmdResult mmd_loss(const std::vector<Vector>& source, const std::vector<Vector>& target, const KernelConfig& kernel) {
    if (source.empty() || target.empty()) throw ShapeError("mmd_loss: both samples must be nonempty");
    return mmd_loss(stack_rows(source), stack_rows(target), kernel);
}

LossGrad smoothing_loss(const Matrix& feats, std::span<const double> preds, double kernel_sigma) {
    if (!(kernel_sigma > 0.0) || !std::isfinite(kernel_sigma)) {
        throw std::invalid_argument("smoothing_loss: kernel_sigma must be positive");
    }
    if (feats.rows == 0) throw ShapeError("smoothing_loss: empty batch");
    require_same_length(feats.rows, preds.size(), "smoothing_loss");
    auto terms = kernels::laplacian_smoothing(feats, preds, kernel_sigma);
    return {terms.value, std::move(terms.grad)};
}

LossGrad smoothing_loss(const std::vector<Vector>& feats, std::span<const double> preds, double kernel_sigma) {
    if (feats.empty()) throw ShapeError("smoothing_loss: empty batch");
    return smoothing_loss(stack_rows(feats), preds, kernel_sigma);
}

CompositeResult composite_loss(const CompositeInputs& in, const CompositeLossConfig& config) {
    config.validate();
    CompositeResult out;

    auto reg = regression_loss(in.reg_pred, in.reg_target, config.regression_norm);
    out.terms.regression = reg.value;
    out.grad_reg_pred = std::move(reg.grad);
    out.total = reg.value;

    if (config.alpha > 0.0) {
        if (in.rank_pred.empty()) throw MissingInputError("composite_loss: alpha > 0 but no rank predictions");
        auto rank = ranking_loss(in.rank_pred, in.rank_diff);
        out.terms.rank = rank.value;
        out.total += config.alpha * rank.value;
        out.grad_rank_pred = std::move(rank.grad);
        for (double& g : out.grad_rank_pred) g *= config.alpha;
    }

    if (config.gamma > 0.0 && config.adaptation == Adaptation::Adversarial) {
        if (in.domain_pred.empty()) throw MissingInputError("composite_loss: adversarial term enabled but no domain outputs");
        auto adv = binary_cross_entropy(in.domain_pred, in.domain_label);
        out.terms.adaptation = adv.value;
        out.total += config.gamma * adv.value;
        out.grad_domain_pred = std::move(adv.grad);
        for (double& g : out.grad_domain_pred) g *= config.gamma;
    } else if (config.gamma > 0.0 && config.adaptation == Adaptation::MMD) {
        if (in.mmd_source.empty() || in.mmd_source.size() != in.mmd_target.size()) {
            throw MissingInputError("composite_loss: MMD term enabled but layer features are missing");
        }
        for (std::size_t l = 0; l < in.mmd_source.size(); ++l) {
            auto mmd = mmd_loss(in.mmd_source[l], in.mmd_target[l], in.mmd_kernel);
            out.terms.adaptation += mmd.value;
            for (double& g : mmd.grad_source.data) g *= config.gamma;
            for (double& g : mmd.grad_target.data) g *= config.gamma;
            out.grad_mmd_source.push_back(std::move(mmd.grad_source));
            out.grad_mmd_target.push_back(std::move(mmd.grad_target));
        }
        out.total += config.gamma * out.terms.adaptation;
    }

    if (config.beta > 0.0) {
        if (in.identity.empty()) throw MissingInputError("composite_loss: beta > 0 but no identity batches");
        const double groups = static_cast<double>(in.identity.size());
        for (const auto& batch : in.identity) {
            auto id = identity_loss(batch);
            out.terms.identity += id.value / groups;
            const double w = config.beta / groups;
            for (Vector* v : {&id.grad.f1_ab, &id.grad.f1_ba, &id.grad.f1_aa, &id.grad.f2_ab, &id.grad.f2_ba}) {
                for (double& g : *v) g *= w;
            }
            out.grad_identity.push_back(std::move(id.grad));
        }
        out.total += config.beta * out.terms.identity;
    }

    if (config.sigma_smooth > 0.0) {
        if (in.smooth_feats.rows == 0) throw MissingInputError("composite_loss: sigma_smooth > 0 but no smoothing batch");
        const double bw = resolve_bandwidth(in.smooth_kernel, in.smooth_feats, Matrix{});
        auto smooth = smoothing_loss(in.smooth_feats, in.smooth_preds, bw);
        out.terms.smoothing = smooth.value;
        out.total += config.sigma_smooth * smooth.value;
        out.grad_smooth_preds = std::move(smooth.grad);
        for (double& g : out.grad_smooth_preds) g *= config.sigma_smooth;
    }

    return out;
}

}  // namespace udareg
