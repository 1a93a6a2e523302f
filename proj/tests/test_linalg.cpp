#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fedsir/linalg.hpp"

#ifdef FEDSIR_HAVE_EIGEN
#include <Eigen/Dense>
#endif

using namespace fedsir;

namespace {

linalg::Matrix random_matrix(std::mt19937_64& rng, std::size_t rows,
                             std::size_t cols) {
    std::normal_distribution<double> dist(0.0, 1.0);
    linalg::Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = dist(rng);
    }
    return m;
}

double fro_norm(const linalg::Matrix& m) {
    double s = 0.0;
    for (double x : m.flat()) s += x * x;
    return std::sqrt(s);
}

// || Z - U diag(s) V^T ||_F
double reconstruction_error(const linalg::Matrix& z,
                            const linalg::SvdResult& svd) {
    double err = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r) {
        for (std::size_t c = 0; c < z.cols(); ++c) {
            double sum = 0.0;
            for (std::size_t j = 0; j < svd.singular_values.size(); ++j) {
                sum += svd.u(r, j) * svd.singular_values[j] * svd.v(c, j);
            }
            double d = z(r, c) - sum;
            err += d * d;
        }
    }
    return std::sqrt(err);
}

double max_gram_deviation(const linalg::Matrix& v) {
    double worst = 0.0;
    for (std::size_t i = 0; i < v.cols(); ++i) {
        for (std::size_t j = 0; j < v.cols(); ++j) {
            double dot = 0.0;
            for (std::size_t r = 0; r < v.rows(); ++r) dot += v(r, i) * v(r, j);
            double want = i == j ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(dot - want));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("matrix storage and transpose") {
    linalg::Matrix m(2, 3);
    m(0, 0) = 1.0;
    m(0, 2) = 5.0;
    m(1, 1) = -2.0;
    linalg::Matrix t = m.transposed();
    CHECK(t.rows() == 3);
    CHECK(t.cols() == 2);
    CHECK(t(0, 0) == 1.0);
    CHECK(t(2, 0) == 5.0);
    CHECK(t(1, 1) == -2.0);
    CHECK(m.row(0).size() == 3);
}

TEST_CASE("svd of a diagonal matrix") {
    linalg::Matrix z(2, 2);
    z(0, 0) = 2.0;
    z(1, 1) = 1.0;
    linalg::SvdResult svd = linalg::svd(z);
    REQUIRE(svd.singular_values.size() == 2);
    CHECK(svd.singular_values[0] == doctest::Approx(2.0));
    CHECK(svd.singular_values[1] == doctest::Approx(1.0));
    CHECK(std::abs(svd.v(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(svd.v(1, 0)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(svd.v(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("svd of a rank-1 matrix") {
    std::vector<double> u{3.0, 4.0};  // norm 5
    linalg::Matrix z(4, 2);
    for (std::size_t r = 0; r < 4; ++r) {
        z(r, 0) = u[0];
        z(r, 1) = u[1];
    }
    linalg::SvdResult svd = linalg::svd(z);
    CHECK(svd.singular_values[0] == doctest::Approx(10.0));  // 5 * sqrt(4)
    CHECK(svd.singular_values[1] == doctest::Approx(0.0).epsilon(1e-10));
    // Dominant right vector is +-u/||u||.
    double dot = svd.v(0, 0) * (u[0] / 5.0) + svd.v(1, 0) * (u[1] / 5.0);
    CHECK(std::abs(dot) == doctest::Approx(1.0));
}

TEST_CASE("svd reconstruction and orthonormality on random shapes") {
    std::mt19937_64 rng(5);
    for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{1, 1},
                              {1, 5},
                              {5, 1},
                              {8, 5},
                              {5, 8},
                              {16, 16},
                              {64, 64},
                              {40, 64},
                              {64, 24}}) {
        linalg::Matrix z = random_matrix(rng, rows, cols);
        linalg::SvdResult svd = linalg::svd(z);

        REQUIRE(svd.singular_values.size() == std::min(rows, cols));
        for (std::size_t j = 0; j + 1 < svd.singular_values.size(); ++j) {
            CHECK(svd.singular_values[j] >= svd.singular_values[j + 1]);
        }
        for (double s : svd.singular_values) CHECK(s >= 0.0);

        CHECK(reconstruction_error(z, svd) <= 1e-8 * fro_norm(z));
        CHECK(max_gram_deviation(svd.v) <= 1e-8);
        CHECK(max_gram_deviation(svd.u) <= 1e-8);
    }
}

TEST_CASE("sym_eig reproduces A v = lambda v with orthonormal vectors") {
    std::mt19937_64 rng(9);
    for (std::size_t n : {1u, 2u, 5u, 16u, 32u}) {
        linalg::Matrix b = random_matrix(rng, n, n);
        // Symmetrize.
        linalg::Matrix a(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                a(i, j) = 0.5 * (b(i, j) + b(j, i));
            }
        }
        linalg::EigResult eig = linalg::sym_eig(a);
        REQUIRE(eig.values.size() == n);
        for (std::size_t j = 0; j + 1 < n; ++j) {
            CHECK(eig.values[j] >= eig.values[j + 1]);
        }
        CHECK(max_gram_deviation(eig.vectors) <= 1e-8);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t i = 0; i < n; ++i) {
                double av = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    av += a(i, k) * eig.vectors(k, j);
                }
                CHECK(av == doctest::Approx(eig.values[j] * eig.vectors(i, j))
                                .epsilon(1e-7)
                                .scale(std::max(1.0, std::abs(eig.values[j]))));
            }
        }
    }
}

#ifdef FEDSIR_HAVE_EIGEN
TEST_CASE("singular values match the Eigen oracle") {
    std::mt19937_64 rng(13);
    for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{8, 5},
                              {5, 8},
                              {20, 20},
                              {33, 12}}) {
        linalg::Matrix z = random_matrix(rng, rows, cols);
        Eigen::MatrixXd ez(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) ez(r, c) = z(r, c);
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> esvd(ez);
        linalg::SvdResult svd = linalg::svd(z);
        REQUIRE(svd.singular_values.size() ==
                static_cast<std::size_t>(esvd.singularValues().size()));
        for (std::size_t j = 0; j < svd.singular_values.size(); ++j) {
            CHECK(svd.singular_values[j] ==
                  doctest::Approx(esvd.singularValues()(j)).epsilon(1e-9));
        }
    }
}

TEST_CASE("eigenvalues match Eigen's self-adjoint solver") {
    std::mt19937_64 rng(17);
    for (std::size_t n : {3u, 8u, 24u}) {
        linalg::Matrix b = random_matrix(rng, n, n);
        linalg::Matrix a(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                a(i, j) = 0.5 * (b(i, j) + b(j, i));
            }
        }
        Eigen::MatrixXd ea(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) ea(i, j) = a(i, j);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ea);
        linalg::EigResult eig = linalg::sym_eig(a);
        // Eigen reports ascending order; ours is descending.
        for (std::size_t j = 0; j < n; ++j) {
            CHECK(eig.values[j] ==
                  doctest::Approx(es.eigenvalues()(n - 1 - j)).epsilon(1e-9));
        }
    }
}
#endif
