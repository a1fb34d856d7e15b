#pragma once

// Recovery of absolute values from predicted pairwise differences:
// dissimilarity matrix -> 1-D SMACOF embedding -> affine fit through two
// labeled anchors.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "udareg/types.hpp"

namespace udareg {

// Symmetric, zero-diagonal, nonnegative, finite.
class DissimilarityMatrix {
public:
    DissimilarityMatrix() = default;
    // Throws DataError unless `d` satisfies the invariants (symmetry to 1e-12).
    explicit DissimilarityMatrix(Matrix d);

    std::size_t size() const { return d_.rows; }
    double operator()(std::size_t i, std::size_t j) const { return d_(i, j); }
    const Matrix& matrix() const { return d_; }

    // Matrix of |a_i - a_j|.
    static DissimilarityMatrix from_points(std::span<const double> points);

private:
    Matrix d_;
};

// Signed difference predictor f(A, B) ~ age(A) - age(B); must be safe to
// call from several threads.
using PairPredictor = std::function<double(std::span<const double>, std::span<const double>)>;

// d_ij = (|f(i, j)| + |f(j, i)|) / 2. Requires at least two items.
DissimilarityMatrix build_dissimilarity(const PairPredictor& predictor, const std::vector<Vector>& items);

struct SmacofOptions {
    std::size_t max_iter = 500;
    double tol = 1e-9;  // relative stress decrease that stops iteration
    std::uint64_t seed = 0;
};

struct Embedding1D {
    Vector coords;
    double final_stress = 0.0;
    std::size_t iterations = 0;
    Vector stress_history;  // stress of the start configuration, then after each iteration
    bool random_start = false;
};

// sqrt(sum_{i != j} (d_ij - |x_i - x_j|)^2)
double stress(const DissimilarityMatrix& d, std::span<const double> coords);

// Torgerson start: leading eigenvector of the double-centered squared
// dissimilarities. Returns an empty vector when the leading eigenvalue is not
// positive.
Vector classical_mds_1d(const DissimilarityMatrix& d, std::uint64_t seed);

Embedding1D smacof_1d(const DissimilarityMatrix& d, const SmacofOptions& options = {});

struct AnchorPair {
    std::size_t first = 0;
    std::size_t second = 1;
};

// Affine map through (coords[first], ages[0]) and (coords[second], ages[1]),
// applied to every coordinate. Throws DegenerateAnchorError if the two anchor
// coordinates coincide.
Vector align_with_anchors(const Embedding1D& emb, AnchorPair anchors, std::array<double, 2> ages);

struct MdsRecovery {
    DissimilarityMatrix dissimilarity;
    Embedding1D embedding;
    Vector ages;
    double mae = 0.0;  // over non-anchor items
};

MdsRecovery recover_ages(const PairPredictor& predictor, const std::vector<Vector>& items,
                         std::span<const double> true_ages, AnchorPair anchors,
                         const SmacofOptions& options = {});

// Mean |recovered - true| excluding the two anchors. Requires >= 3 items.
double mds_pipeline_mae(const PairPredictor& predictor, const std::vector<Vector>& items,
                        std::span<const double> true_ages, AnchorPair anchors,
                        const SmacofOptions& options = {});

// Plain-text dump: "n", then n rows of the matrix, then "coords" and the
// embedding coordinates.
void write_mds_dump(std::ostream& out, const DissimilarityMatrix& d, const Embedding1D& emb);

}  // namespace udareg
