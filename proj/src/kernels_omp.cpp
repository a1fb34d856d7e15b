#include <cmath>
#include <exception>
#include <mutex>

#include "udareg/kernels.hpp"

namespace udareg::kernels {

namespace {

double squared_distance(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        s += d * d;
    }
    return s;
}

// Ordered sum of per-row partials; keeps results independent of scheduling.
double ordered_sum(const Vector& partials) {
    double s = 0.0;
    for (double p : partials) s += p;
    return s;
}

std::ptrdiff_t as_index(std::size_t n) { return static_cast<std::ptrdiff_t>(n); }

}  // namespace

CrossSum gaussian_cross_sum(const Matrix& a, const Matrix& b, double bandwidth, bool with_grad) {
    if (a.cols != b.cols) throw ShapeError("gaussian_cross_sum: feature dimensions differ");
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    const double inv_bw2 = 1.0 / (bandwidth * bandwidth);
    const std::size_t n = a.rows;
    const std::size_t m = b.rows;
    const std::size_t dim = a.cols;

    Matrix gram(n, m);
    Vector row_sums(n, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < as_index(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double k = std::exp(-squared_distance(a.row(i), b.row(j)) * inv);
            gram(i, j) = k;
            acc += k;
        }
        row_sums[i] = acc;
    }

    CrossSum out;
    out.sum = ordered_sum(row_sums);
    if (!with_grad) return out;

    out.grad_a = Matrix(n, dim);
    out.grad_b = Matrix(m, dim);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < as_index(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        for (std::size_t j = 0; j < m; ++j) {
            const double k = gram(i, j) * inv_bw2;
            for (std::size_t c = 0; c < dim; ++c) out.grad_a(i, c) -= k * (a(i, c) - b(j, c));
        }
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t jj = 0; jj < as_index(m); ++jj) {
        const auto j = static_cast<std::size_t>(jj);
        for (std::size_t i = 0; i < n; ++i) {
            const double k = gram(i, j) * inv_bw2;
            for (std::size_t c = 0; c < dim; ++c) out.grad_b(j, c) += k * (a(i, c) - b(j, c));
        }
    }
    return out;
}

SmoothingTerms laplacian_smoothing(const Matrix& feats, std::span<const double> preds, double sigma) {
    if (feats.rows != preds.size()) throw ShapeError("laplacian_smoothing: one prediction per feature row required");
    const double inv = 1.0 / (2.0 * sigma * sigma);
    const std::size_t n = feats.rows;
    SmoothingTerms out;
    out.grad.assign(n, 0.0);
    Vector row_values(n, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < as_index(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double value = 0.0;
        double grad = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double w = std::exp(-squared_distance(feats.row(i), feats.row(j)) * inv);
            const double diff = preds[i] - preds[j];
            value += 0.5 * w * diff * diff;
            grad += 2.0 * w * diff;
        }
        row_values[i] = value;
        out.grad[i] = grad;
    }
    out.value = ordered_sum(row_values);
    return out;
}

Vector pairwise_distances(const Matrix& x) {
    const std::size_t n = x.rows;
    Vector out(n < 2 ? 0 : n * (n - 1) / 2);
#pragma omp parallel for schedule(dynamic, 8)
    for (std::ptrdiff_t ii = 0; ii < as_index(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        // Offset of row i in the packed upper triangle.
        std::size_t k = i * n - i * (i + 1) / 2;
        for (std::size_t j = i + 1; j < n; ++j) out[k++] = std::sqrt(squared_distance(x.row(i), x.row(j)));
    }
    return out;
}

double stress_1d(const Matrix& d, std::span<const double> x) {
    if (d.rows != x.size() || d.cols != x.size()) throw ShapeError("stress_1d: size mismatch");
    const std::size_t n = x.size();
    Vector row_values(n, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < as_index(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double r = d(i, j) - std::abs(x[i] - x[j]);
            s += r * r;
        }
        row_values[i] = s;
    }
    return std::sqrt(ordered_sum(row_values));
}

Vector guttman_1d(const Matrix& d, std::span<const double> x) {
    if (d.rows != x.size() || d.cols != x.size()) throw ShapeError("guttman_1d: size mismatch");
    const std::size_t n = x.size();
    Vector out(n, 0.0);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < as_index(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || x[i] == x[j]) continue;
            acc += x[i] > x[j] ? d(i, j) : -d(i, j);
        }
        out[i] = acc / static_cast<double>(n);
    }
    return out;
}

Matrix pairwise_fill(std::size_t n, const PairFunction& f) {
    Matrix m(n, n);
    std::exception_ptr failure;
    std::mutex failure_mutex;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t ii = 0; ii < as_index(n); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        try {
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j) m(i, j) = f(i, j);
            }
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return m;
}

}  // namespace udareg::kernels
