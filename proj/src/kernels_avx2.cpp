#include "kernels_detail.hpp"

#if FEDSIR_HAVE_AVX2_TU

#include <immintrin.h>

#include <cassert>
#include <cmath>

// AVX2+FMA variants, 4 doubles per lane. This TU is compiled with
// -mavx2 -mfma; callers must check avx2_available() before dispatching here.

namespace fedsir::kern::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    const std::size_t n = a.size();
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i),
                              _mm256_loadu_pd(b.data() + i), acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return hsum(acc) + tail;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    const std::size_t n = x.size();
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y.data() + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x.data() + i), vy);
        _mm256_storeu_pd(y.data() + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scal(double alpha, std::span<double> x) {
    const std::size_t n = x.size();
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x.data() + i,
                         _mm256_mul_pd(va, _mm256_loadu_pd(x.data() + i)));
    }
    for (; i < n; ++i) x[i] *= alpha;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    const std::size_t n = a.size();
    std::size_t i = 0;
    __m256d acc = _mm256_setzero_pd();
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i),
                                        _mm256_loadu_pd(b.data() + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        tail += d * d;
    }
    return hsum(acc) + tail;
}

void matvec(std::span<const double> w, std::span<const double> x,
            std::span<double> y, std::size_t rows, std::size_t cols) {
    assert(w.size() == rows * cols && x.size() == cols && y.size() == rows);
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = dot(w.subspan(r * cols, cols), x);
    }
}

void matvec_t(std::span<const double> w, std::span<const double> g,
              std::span<double> y, std::size_t rows, std::size_t cols) {
    assert(w.size() == rows * cols && g.size() == rows && y.size() == cols);
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        axpy(g[r], w.subspan(r * cols, cols), y);
    }
}

void ger(double alpha, std::span<const double> g, std::span<const double> x,
         std::span<double> w, std::size_t rows, std::size_t cols) {
    assert(w.size() == rows * cols && g.size() == rows && x.size() == cols);
    for (std::size_t r = 0; r < rows; ++r) {
        axpy(alpha * g[r], x, w.subspan(r * cols, cols));
    }
}

void adam_step(std::span<double> p, std::span<const double> g,
               std::span<double> m, std::span<double> v, double lr, double b1,
               double b2, double eps, double wd, double bias_corr1,
               double bias_corr2) {
    assert(p.size() == g.size() && p.size() == m.size() &&
           p.size() == v.size());
    const std::size_t n = p.size();
    const __m256d vb1 = _mm256_set1_pd(b1);
    const __m256d vb2 = _mm256_set1_pd(b2);
    const __m256d v1mb1 = _mm256_set1_pd(1.0 - b1);
    const __m256d v1mb2 = _mm256_set1_pd(1.0 - b2);
    const __m256d vwd = _mm256_set1_pd(wd);
    const __m256d vlr = _mm256_set1_pd(lr);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vibc1 = _mm256_set1_pd(1.0 / bias_corr1);
    const __m256d vibc2 = _mm256_set1_pd(1.0 / bias_corr2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vp = _mm256_loadu_pd(p.data() + i);
        const __m256d vg =
            _mm256_fmadd_pd(vwd, vp, _mm256_loadu_pd(g.data() + i));
        __m256d vm = _mm256_loadu_pd(m.data() + i);
        __m256d vv = _mm256_loadu_pd(v.data() + i);
        vm = _mm256_fmadd_pd(vb1, vm, _mm256_mul_pd(v1mb1, vg));
        vv = _mm256_fmadd_pd(vb2, vv, _mm256_mul_pd(v1mb2, _mm256_mul_pd(vg, vg)));
        _mm256_storeu_pd(m.data() + i, vm);
        _mm256_storeu_pd(v.data() + i, vv);
        const __m256d mhat = _mm256_mul_pd(vm, vibc1);
        const __m256d vhat = _mm256_mul_pd(vv, vibc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        vp = _mm256_sub_pd(vp, _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom));
        _mm256_storeu_pd(p.data() + i, vp);
    }
    for (; i < n; ++i) {
        const double gi = g[i] + wd * p[i];
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        const double mhat = m[i] / bias_corr1;
        const double vhat = v[i] / bias_corr2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace fedsir::kern::avx2

#endif  // FEDSIR_HAVE_AVX2_TU
