#include "udareg/mds.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "udareg/kernels.hpp"
#include "udareg/rng.hpp"

namespace udareg {

namespace {

constexpr std::size_t kPowerIterations = 2000;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void normalize(Vector& v) {
    const double norm = std::sqrt(dot(v, v));
    if (norm > 0.0) for (double& x : v) x /= norm;
}

Vector mat_vec(const Matrix& m, std::span<const double> v) {
    Vector out(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) out[i] = dot(m.row(i), v);
    return out;
}

}  // namespace

DissimilarityMatrix::DissimilarityMatrix(Matrix d) : d_(std::move(d)) {
    if (d_.rows != d_.cols) throw DataError("dissimilarity matrix must be square");
    for (std::size_t i = 0; i < d_.rows; ++i) {
        if (d_(i, i) != 0.0) throw DataError(fmt::format("dissimilarity diagonal entry {} is not zero", i));
        for (std::size_t j = 0; j < d_.cols; ++j) {
            const double v = d_(i, j);
            if (!std::isfinite(v)) throw DataError(fmt::format("dissimilarity ({}, {}) is not finite", i, j));
            if (v < 0.0) throw DataError(fmt::format("dissimilarity ({}, {}) is negative", i, j));
            if (std::abs(v - d_(j, i)) > 1e-12 * std::max(1.0, std::abs(v))) {
                throw DataError(fmt::format("dissimilarity matrix is not symmetric at ({}, {})", i, j));
            }
        }
    }
}

DissimilarityMatrix DissimilarityMatrix::from_points(std::span<const double> points) {
    Matrix d(points.size(), points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = 0; j < points.size(); ++j) d(i, j) = std::abs(points[i] - points[j]);
    }
    return DissimilarityMatrix(std::move(d));
}

DissimilarityMatrix build_dissimilarity(const PairPredictor& predictor, const std::vector<Vector>& items) {
    const std::size_t n = items.size();
    if (n < 2) throw DataError("build_dissimilarity: need at least two items");
    const Matrix signed_pred = kernels::pairwise_fill(n, [&](std::size_t i, std::size_t j) {
        const double v = predictor(items[i], items[j]);
        if (!std::isfinite(v)) throw DataError(fmt::format("pair predictor returned a non-finite value for ({}, {})", i, j));
        return v;
    });
    Matrix d(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (std::abs(signed_pred(i, j)) + std::abs(signed_pred(j, i)));
            d(i, j) = v;
            d(j, i) = v;
        }
    }
    return DissimilarityMatrix(std::move(d));
}

double stress(const DissimilarityMatrix& d, std::span<const double> coords) {
    return kernels::stress_1d(d.matrix(), coords);
}

Vector classical_mds_1d(const DissimilarityMatrix& d, std::uint64_t seed) {
    const std::size_t n = d.size();
    // B = -1/2 J D^2 J
    Matrix b(n, n);
    Vector row_mean(n, 0.0);
    double grand_mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double sq = d(i, j) * d(i, j);
            b(i, j) = sq;
            row_mean[i] += sq;
        }
        grand_mean += row_mean[i];
        row_mean[i] /= static_cast<double>(n);
    }
    grand_mean /= static_cast<double>(n * n);
    double shift = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double row_abs = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            b(i, j) = -0.5 * (b(i, j) - row_mean[i] - row_mean[j] + grand_mean);
            row_abs += std::abs(b(i, j));
        }
        shift = std::max(shift, row_abs);
    }
    if (shift == 0.0) return {};

    // Power iteration on B + shift*I converges to the algebraically largest
    // eigenvector of B since the shift makes the spectrum nonnegative.
    auto rng = make_rng(seed, 0x3d5);
    Vector v(n);
    for (double& x : v) x = standard_normal(rng);
    normalize(v);
    for (std::size_t it = 0; it < kPowerIterations; ++it) {
        Vector next = mat_vec(b, v);
        for (std::size_t i = 0; i < n; ++i) next[i] += shift * v[i];
        normalize(next);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - v[i]));
        v = std::move(next);
        if (change < 1e-13) break;
    }
    const double lambda = dot(v, mat_vec(b, v));
    if (!(lambda > 1e-12 * shift)) return {};
    const double scale = std::sqrt(lambda);
    for (double& x : v) x *= scale;
    return v;
}

Embedding1D smacof_1d(const DissimilarityMatrix& d, const SmacofOptions& options) {
    const std::size_t n = d.size();
    if (n < 2) throw DataError("smacof_1d: need at least two points");
    if (!(options.tol > 0.0)) throw ConfigError("smacof_1d: tol must be positive");

    Embedding1D emb;
    emb.coords = classical_mds_1d(d, options.seed);
    if (emb.coords.empty()) {
        auto rng = make_rng(options.seed, 0x7a4);
        emb.coords.resize(n);
        for (double& x : emb.coords) x = uniform_unit(rng) - 0.5;
        emb.random_start = true;
    }

    double current = stress(d, emb.coords);
    emb.stress_history.push_back(current);
    for (std::size_t it = 1; it <= options.max_iter && current > 0.0; ++it) {
        Vector next = kernels::guttman_1d(d.matrix(), emb.coords);
        const double next_stress = stress(d, next);
        emb.coords = std::move(next);
        emb.stress_history.push_back(next_stress);
        emb.iterations = it;
        const double relative_decrease = (current - next_stress) / current;
        current = next_stress;
        if (relative_decrease < options.tol) break;
    }
    emb.final_stress = current;
    return emb;
}

Vector align_with_anchors(const Embedding1D& emb, AnchorPair anchors, std::array<double, 2> ages) {
    const std::size_t n = emb.coords.size();
    if (anchors.first >= n || anchors.second >= n) throw DataError("anchor index out of range");
    if (anchors.first == anchors.second) throw DegenerateAnchorError("anchors must be two distinct items");
    const double c1 = emb.coords[anchors.first];
    const double c2 = emb.coords[anchors.second];
    if (std::abs(c2 - c1) <= 1e-12 * std::max({1.0, std::abs(c1), std::abs(c2)})) {
        throw DegenerateAnchorError(fmt::format(
            "degenerate anchors: items {} and {} share the embedded coordinate {}", anchors.first, anchors.second, c1));
    }
    const double slope = (ages[1] - ages[0]) / (c2 - c1);
    Vector out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = ages[0] + slope * (emb.coords[i] - c1);
    return out;
}

MdsRecovery recover_ages(const PairPredictor& predictor, const std::vector<Vector>& items,
                         std::span<const double> true_ages, AnchorPair anchors, const SmacofOptions& options) {
    if (items.size() < 3) throw DataError("MDS recovery needs at least three items");
    if (true_ages.size() != items.size()) throw ShapeError("one true age per item required");
    MdsRecovery out;
    out.dissimilarity = build_dissimilarity(predictor, items);
    out.embedding = smacof_1d(out.dissimilarity, options);
    out.ages = align_with_anchors(out.embedding, anchors, {true_ages[anchors.first], true_ages[anchors.second]});
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i == anchors.first || i == anchors.second) continue;
        total += std::abs(out.ages[i] - true_ages[i]);
        ++count;
    }
    out.mae = total / static_cast<double>(count);
    return out;
}

double mds_pipeline_mae(const PairPredictor& predictor, const std::vector<Vector>& items,
                        std::span<const double> true_ages, AnchorPair anchors, const SmacofOptions& options) {
    return recover_ages(predictor, items, true_ages, anchors, options).mae;
}

void write_mds_dump(std::ostream& out, const DissimilarityMatrix& d, const Embedding1D& emb) {
    out << d.size() << '\n';
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t j = 0; j < d.size(); ++j) out << (j ? " " : "") << fmt::format("{}", d(i, j));
        out << '\n';
    }
    out << "coords";
    for (double c : emb.coords) out << ' ' << fmt::format("{}", c);
    out << '\n' << fmt::format("stress {}\niterations {}\n", emb.final_stress, emb.iterations);
}

}  // namespace udareg
