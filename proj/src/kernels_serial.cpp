#include <cmath>

#include "udareg/kernels.hpp"

namespace udareg::kernels::serial {

namespace {

double squared_distance(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - y[k];
        s += d * d;
    }
    return s;
}

}  // namespace

CrossSum gaussian_cross_sum(const Matrix& a, const Matrix& b, double bandwidth, bool with_grad) {
    if (a.cols != b.cols) throw ShapeError("gaussian_cross_sum: feature dimensions differ");
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
    const double inv_bw2 = 1.0 / (bandwidth * bandwidth);
    CrossSum out;
    if (with_grad) {
        out.grad_a = Matrix(a.rows, a.cols);
        out.grad_b = Matrix(b.rows, b.cols);
    }
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double k = std::exp(-squared_distance(a.row(i), b.row(j)) * inv);
            out.sum += k;
            if (!with_grad) continue;
            for (std::size_t c = 0; c < a.cols; ++c) {
                const double g = k * (a(i, c) - b(j, c)) * inv_bw2;
                out.grad_a(i, c) -= g;
                out.grad_b(j, c) += g;
            }
        }
    }
    return out;
}

SmoothingTerms laplacian_smoothing(const Matrix& feats, std::span<const double> preds, double sigma) {
    if (feats.rows != preds.size()) throw ShapeError("laplacian_smoothing: one prediction per feature row required");
    const double inv = 1.0 / (2.0 * sigma * sigma);
    SmoothingTerms out;
    out.grad.assign(preds.size(), 0.0);
    for (std::size_t i = 0; i < feats.rows; ++i) {
        for (std::size_t j = 0; j < feats.rows; ++j) {
            const double w = std::exp(-squared_distance(feats.row(i), feats.row(j)) * inv);
            const double diff = preds[i] - preds[j];
            out.value += 0.5 * w * diff * diff;
            out.grad[i] += 2.0 * w * diff;
        }
    }
    return out;
}

Vector pairwise_distances(const Matrix& x) {
    Vector out;
    out.reserve(x.rows * (x.rows - (x.rows > 0 ? 1 : 0)) / 2);
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = i + 1; j < x.rows; ++j) out.push_back(std::sqrt(squared_distance(x.row(i), x.row(j))));
    }
    return out;
}

double stress_1d(const Matrix& d, std::span<const double> x) {
    if (d.rows != x.size() || d.cols != x.size()) throw ShapeError("stress_1d: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (i == j) continue;
            const double r = d(i, j) - std::abs(x[i] - x[j]);
            s += r * r;
        }
    }
    return std::sqrt(s);
}

Vector guttman_1d(const Matrix& d, std::span<const double> x) {
    if (d.rows != x.size() || d.cols != x.size()) throw ShapeError("guttman_1d: size mismatch");
    const std::size_t n = x.size();
    Vector out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || x[i] == x[j]) continue;
            out[i] += x[i] > x[j] ? d(i, j) : -d(i, j);
        }
        out[i] /= static_cast<double>(n);
    }
    return out;
}

Matrix pairwise_fill(std::size_t n, const PairFunction& f) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) m(i, j) = f(i, j);
        }
    }
    return m;
}

}  // namespace udareg::kernels::serial
