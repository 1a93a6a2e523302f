#include <cassert>
#include <cmath>

#include "kernels_detail.hpp"

// Scalar reference kernels. These define the semantics; the SIMD variants
// must agree with them up to floating-point reassociation.

namespace fedsir::kern::ref {

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scal(double alpha, std::span<double> x) {
    for (double& v : x) v *= alpha;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void matvec(std::span<const double> w, std::span<const double> x,
            std::span<double> y, std::size_t rows, std::size_t cols) {
    assert(w.size() == rows * cols && x.size() == cols && y.size() == rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = w.data() + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

void matvec_t(std::span<const double> w, std::span<const double> g,
              std::span<double> y, std::size_t rows, std::size_t cols) {
    assert(w.size() == rows * cols && g.size() == rows && y.size() == cols);
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = w.data() + r * cols;
        const double gr = g[r];
        for (std::size_t c = 0; c < cols; ++c) y[c] += gr * row[c];
    }
}

void ger(double alpha, std::span<const double> g, std::span<const double> x,
         std::span<double> w, std::size_t rows, std::size_t cols) {
    assert(w.size() == rows * cols && g.size() == rows && x.size() == cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = w.data() + r * cols;
        const double ag = alpha * g[r];
        for (std::size_t c = 0; c < cols; ++c) row[c] += ag * x[c];
    }
}

void adam_step(std::span<double> p, std::span<const double> g,
               std::span<double> m, std::span<double> v, double lr, double b1,
               double b2, double eps, double wd, double bias_corr1,
               double bias_corr2) {
    assert(p.size() == g.size() && p.size() == m.size() &&
           p.size() == v.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i] + wd * p[i];
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        const double mhat = m[i] / bias_corr1;
        const double vhat = v[i] / bias_corr2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace fedsir::kern::ref
