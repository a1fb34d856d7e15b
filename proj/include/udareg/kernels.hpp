#pragma once

// Pairwise O(n^2) kernels shared by the MMD, Laplacian-smoothing and MDS code.
//
// The functions in udareg::kernels are OpenMP-parallel over rows. Each row is
// accumulated serially and row partials are combined in index order, so the
// result does not depend on the thread count. udareg::kernels::serial holds
// the plain double-loop reference used by tests and the benchmark.

#include <cstddef>
#include <functional>
#include <span>

#include "udareg/types.hpp"

namespace udareg::kernels {

struct CrossSum {
    double sum = 0.0;
    Matrix grad_a;  // d sum / d a_i, same shape as a (empty unless requested)
    Matrix grad_b;  // d sum / d b_j, same shape as b
};

struct SmoothingTerms {
    double value = 0.0;
    Vector grad;  // d value / d preds
};

using PairFunction = std::function<double(std::size_t, std::size_t)>;

// sum_{i,j} exp(-|a_i - b_j|^2 / (2 bw^2)) over the rows of a and b.
CrossSum gaussian_cross_sum(const Matrix& a, const Matrix& b, double bandwidth, bool with_grad);

// 1/2 sum_{i,j} w_ij (p_i - p_j)^2 with w_ij = exp(-|x_i - x_j|^2 / (2 sigma^2)).
SmoothingTerms laplacian_smoothing(const Matrix& feats, std::span<const double> preds, double sigma);

// Euclidean distances |x_i - x_j| for i < j, in row-major upper-triangle order.
Vector pairwise_distances(const Matrix& x);

// sqrt(sum_{i != j} (d_ij - |x_i - x_j|)^2) for a 1-D configuration.
double stress_1d(const Matrix& d, std::span<const double> x);

// One unit-weight Guttman transform of a 1-D configuration.
Vector guttman_1d(const Matrix& d, std::span<const double> x);

// n x n matrix with f(i, j) off the diagonal and 0 on it. f must be safe to
// call concurrently.
Matrix pairwise_fill(std::size_t n, const PairFunction& f);

namespace serial {

CrossSum gaussian_cross_sum(const Matrix& a, const Matrix& b, double bandwidth, bool with_grad);
SmoothingTerms laplacian_smoothing(const Matrix& feats, std::span<const double> preds, double sigma);
Vector pairwise_distances(const Matrix& x);
double stress_1d(const Matrix& d, std::span<const double> x);
Vector guttman_1d(const Matrix& d, std::span<const double> x);
Matrix pairwise_fill(std::size_t n, const PairFunction& f);

}  // namespace serial

}  // namespace udareg::kernels
