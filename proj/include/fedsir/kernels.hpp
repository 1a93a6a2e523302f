#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops used by the training and aggregation code.
// Every kernel has a scalar reference implementation and may have SIMD
// variants; the active backend is picked once at startup from CPUID and
// can be overridden with set_backend() or the FEDSIR_KERNELS env var.
//
// Matrices are row-major, dense, double precision.

namespace fedsir::kern {

enum class Backend { kScalar, kAvx2 };

// Vector-vector.
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scal(double alpha, std::span<double> x);
double sq_dist(std::span<const double> a, std::span<const double> b);

// y = W x, W is rows x cols row-major, x has cols entries, y has rows.
void matvec(std::span<const double> w, std::span<const double> x,
            std::span<double> y, std::size_t rows, std::size_t cols);

// y = W^T g, g has rows entries, y has cols.
void matvec_t(std::span<const double> w, std::span<const double> g,
              std::span<double> y, std::size_t rows, std::size_t cols);

// W += alpha * g * x^T  (rank-1 accumulate into rows x cols row-major).
void ger(double alpha, std::span<const double> g, std::span<const double> x,
         std::span<double> w, std::size_t rows, std::size_t cols);

// One fused Adam step with L2 weight decay folded into the gradient:
//   g'  = g + wd * p
//   m   = b1*m + (1-b1)*g'
//   v   = b2*v + (1-b2)*g'^2
//   p  -= lr * (m/bc1) / (sqrt(v/bc2) + eps)
void adam_step(std::span<double> p, std::span<const double> g,
               std::span<double> m, std::span<double> v, double lr, double b1,
               double b2, double eps, double wd, double bias_corr1,
               double bias_corr2);

// Backend control. set_backend(kAvx2) throws if the CPU lacks AVX2/FMA.
Backend active_backend();
void set_backend(Backend b);
bool avx2_available();
std::string_view backend_name(Backend b);

}  // namespace fedsir::kern
