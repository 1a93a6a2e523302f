#include "fedsir/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedsir::linalg {

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

namespace {

// Hestenes one-sided Jacobi on a tall matrix (rows >= cols): rotates column
// pairs until mutually orthogonal. On exit the columns of `b` are U*sigma
// and `v` accumulates the right rotations.
void one_sided_jacobi(Matrix& b, Matrix& v) {
    const std::size_t n = b.cols();
    const std::size_t m = b.rows();
    constexpr double kTol = 1e-15;
    constexpr int kMaxSweeps = 60;

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    app += bp * bp;
                    aqq += bq * bq;
                    apq += bp * bq;
                }
                if (std::abs(apq) <= kTol * std::sqrt(app * aqq)) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t =
                    (zeta >= 0.0 ? 1.0 : -1.0) /
                    (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = cs * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double bp = b(i, p), bq = b(i, q);
                    b(i, p) = cs * bp - sn * bq;
                    b(i, q) = sn * bp + cs * bq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = cs * vp - sn * vq;
                    v(i, q) = sn * vp + cs * vq;
                }
            }
        }
        if (!rotated) break;
    }
}

SvdResult svd_tall(const Matrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    Matrix b = a;
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    one_sided_jacobi(b, v);

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += b(i, j) * b(i, j);
        sigma[j] = std::sqrt(s);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return sigma[x] > sigma[y];
    });

    SvdResult out;
    out.singular_values.resize(n);
    out.u = Matrix(m, n);
    out.v = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        const double s = sigma[src];
        out.singular_values[j] = s;
        for (std::size_t i = 0; i < n; ++i) out.v(i, j) = v(i, src);
        if (s > 0.0) {
            for (std::size_t i = 0; i < m; ++i) out.u(i, j) = b(i, src) / s;
        }
    }
    return out;
}

}  // namespace

SvdResult svd(const Matrix& a) {
    if (a.rows() >= a.cols()) return svd_tall(a);
    // Wide: decompose the transpose and swap the factors.
    SvdResult t = svd_tall(a.transposed());
    SvdResult out;
    out.singular_values = std::move(t.singular_values);
    out.u = std::move(t.v);
    out.v = std::move(t.u);
    return out;
}

EigResult sym_eig(const Matrix& a) {
    const std::size_t n = a.rows();
    Matrix m = a;
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v(i, i) = 1.0;

    double frob = 0.0;
    for (double x : m.flat()) frob += x * x;
    frob = std::sqrt(frob);
    const double tol = 1e-14 * std::max(frob, 1e-300);
    constexpr int kMaxSweeps = 100;

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
        if (std::sqrt(2.0 * off) <= tol) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (std::abs(apq) <= tol / (n * n + 1)) continue;
                const double tau = (m(q, q) - m(p, p)) / (2.0 * apq);
                const double t =
                    (tau >= 0.0 ? 1.0 : -1.0) /
                    (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < n; ++i) {
                    const double mip = m(i, p), miq = m(i, q);
                    m(i, p) = c * mip - s * miq;
                    m(i, q) = s * mip + c * miq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double mpi = m(p, i), mqi = m(q, i);
                    m(p, i) = c * mpi - s * mqi;
                    m(q, i) = s * mpi + c * mqi;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = m(i, i);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return diag[x] > diag[y];
    });

    EigResult out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        out.values[j] = diag[order[j]];
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

}  // namespace fedsir::linalg
