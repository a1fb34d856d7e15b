#pragma once

// Loss terms for adapted regression, each returning its value together with
// the exact gradient with respect to its inputs.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "udareg/types.hpp"

namespace udareg {

enum class RegressionNorm { L1, L2 };
enum class Adaptation { None, Adversarial, MMD };

std::string_view to_string(RegressionNorm n);
std::string_view to_string(Adaptation a);
RegressionNorm parse_regression_norm(std::string_view s);
Adaptation parse_adaptation(std::string_view s);

struct CompositeLossConfig {
    double alpha = 0.0;         // ranking
    double beta = 0.0;          // identity / antisymmetry
    double gamma = 0.0;         // adversarial or MMD
    double sigma_smooth = 0.0;  // Laplacian smoothing
    RegressionNorm regression_norm = RegressionNorm::L1;
    Adaptation adaptation = Adaptation::None;

    void validate() const;
};

// Gaussian kernel bandwidth; nullopt selects the median heuristic.
struct KernelConfig {
    std::optional<double> bandwidth;

    static KernelConfig median() { return {}; }
    static KernelConfig fixed(double bw) { return {bw}; }
    void validate() const;
};

struct LossGrad {
    double value = 0.0;
    Vector grad;
};

LossGrad regression_loss(std::span<const double> pred, std::span<const double> target, RegressionNorm norm);

// Ranking target: 1 if d > 0, 0 if d < 0, 0.5 at a tie.
double rank_target(double diff);

// Mean binary cross-entropy of probabilities against labels in [0, 1].
// Probabilities are clamped to [1e-7, 1 - 1e-7]; values outside [0, 1] throw.
LossGrad binary_cross_entropy(std::span<const double> prob, std::span<const double> labels);

// BCE of predicted ranks against rank_target(age_diff).
LossGrad ranking_loss(std::span<const double> rank_pred, std::span<const double> age_diff);

struct IdentityBatch {
    Vector f1_ab, f1_ba, f1_aa, f2_ab, f2_ba;
};

struct IdentityLossResult {
    double value = 0.0;
    IdentityBatch grad;
};

// mean(|f1(A,A)| + |f1(A,B) + f1(B,A)| + |f2(A,B) + f2(B,A) - 1|)
IdentityLossResult identity_loss(std::span<const double> f1_ab, std::span<const double> f1_ba,
                                 std::span<const double> f1_aa, std::span<const double> f2_ab,
                                 std::span<const double> f2_ba);
IdentityLossResult identity_loss(const IdentityBatch& batch);

// Median of pairwise Euclidean distances over the rows; 1.0 if that is 0 or
// there are fewer than two rows.
double median_heuristic_bandwidth(const Matrix& pooled);
double resolve_bandwidth(const KernelConfig& kernel, const Matrix& a, const Matrix& b);

struct MmdResult {
    double value = 0.0;
    double bandwidth = 0.0;
    Matrix grad_source;
    Matrix grad_target;
};

// Biased (V-statistic) squared MMD with a Gaussian kernel. The bandwidth is
// treated as a constant for differentiation, including when it comes from the
// median heuristic.
MmdResult mmd_loss(const Matrix& source, const Matrix& target, const KernelConfig& kernel);
MmdResult mmd_loss(const std::vector<Vector>& source, const std::vector<Vector>& target,
                   const KernelConfig& kernel);

// 1/2 sum_{i,j} w_ij (p_i - p_j)^2, w_ij = exp(-|x_i - x_j|^2 / (2 sigma^2)).
// Gradient is with respect to the predictions only.
LossGrad smoothing_loss(const Matrix& feats, std::span<const double> preds, double kernel_sigma);
LossGrad smoothing_loss(const std::vector<Vector>& feats, std::span<const double> preds, double kernel_sigma);

struct CompositeInputs {
    Vector reg_pred;
    Vector reg_target;

    Vector rank_pred;  // required when alpha > 0
    Vector rank_diff;

    Vector domain_pred;   // discriminator outputs, required for Adversarial
    Vector domain_label;  // 0 source, 1 target

    std::vector<Matrix> mmd_source;  // one matrix per adapted layer, required for MMD
    std::vector<Matrix> mmd_target;
    KernelConfig mmd_kernel;

    std::vector<IdentityBatch> identity;  // averaged over groups, required when beta > 0

    Matrix smooth_feats;  // required when sigma_smooth > 0
    Vector smooth_preds;
    KernelConfig smooth_kernel;
};

struct CompositeTerms {
    double regression = 0.0;
    double rank = 0.0;
    double adaptation = 0.0;
    double identity = 0.0;
    double smoothing = 0.0;
};

// Gradients are already multiplied by their term weights.
struct CompositeResult {
    double total = 0.0;
    CompositeTerms terms;
    Vector grad_reg_pred;
    Vector grad_rank_pred;
    Vector grad_domain_pred;
    std::vector<Matrix> grad_mmd_source;
    std::vector<Matrix> grad_mmd_target;
    std::vector<IdentityBatch> grad_identity;
    Vector grad_smooth_preds;
};

// L_reg + alpha L_rank + gamma L_adapt + beta L_id + sigma_smooth L_smooth.
// A term is evaluated iff its weight is positive (and, for L_adapt, the
// adaptation mode is not None); its inputs must then be present.
CompositeResult composite_loss(const CompositeInputs& in, const CompositeLossConfig& config);

}  // namespace udareg
