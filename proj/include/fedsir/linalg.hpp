#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Small dense matrices and the two decompositions the spectral machinery
// needs. Sizes here are tiny (feature dim x feature dim, or a few hundred
// rows per class), so cyclic Jacobi methods are accurate and plenty fast.

namespace fedsir::linalg {

class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) {
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        return data_[r * cols_ + c];
    }

    std::span<double> row(std::size_t r) {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<const double> flat() const { return data_; }
    std::span<double> flat() { return data_; }

    Matrix transposed() const;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Thin SVD A = U diag(s) V^T with singular values sorted descending.
// U is rows x p, V is cols x p, p = min(rows, cols). One-sided Jacobi.
struct SvdResult {
    std::vector<double> singular_values;
    Matrix u;  // columns are left singular vectors
    Matrix v;  // columns are right singular vectors
};

SvdResult svd(const Matrix& a);

// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
// Columns of `vectors` are the eigenvectors.
struct EigResult {
    std::vector<double> values;
    Matrix vectors;
};

EigResult sym_eig(const Matrix& a);

}  // namespace fedsir::linalg
