#pragma once

#include <cstddef>
#include <span>

// Internal: per-backend entry points behind the dispatch table.

namespace fedsir::kern::ref {

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scal(double alpha, std::span<double> x);
double sq_dist(std::span<const double> a, std::span<const double> b);
void matvec(std::span<const double> w, std::span<const double> x,
            std::span<double> y, std::size_t rows, std::size_t cols);
void matvec_t(std::span<const double> w, std::span<const double> g,
              std::span<double> y, std::size_t rows, std::size_t cols);
void ger(double alpha, std::span<const double> g, std::span<const double> x,
         std::span<double> w, std::size_t rows, std::size_t cols);
void adam_step(std::span<double> p, std::span<const double> g,
               std::span<double> m, std::span<double> v, double lr, double b1,
               double b2, double eps, double wd, double bias_corr1,
               double bias_corr2);

}  // namespace fedsir::kern::ref

#if defined(__x86_64__) || defined(_M_X64)
#define FEDSIR_HAVE_AVX2_TU 1

namespace fedsir::kern::avx2 {

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void scal(double alpha, std::span<double> x);
double sq_dist(std::span<const double> a, std::span<const double> b);
void matvec(std::span<const double> w, std::span<const double> x,
            std::span<double> y, std::size_t rows, std::size_t cols);
void matvec_t(std::span<const double> w, std::span<const double> g,
              std::span<double> y, std::size_t rows, std::size_t cols);
void ger(double alpha, std::span<const double> g, std::span<const double> x,
         std::span<double> w, std::size_t rows, std::size_t cols);
void adam_step(std::span<double> p, std::span<const double> g,
               std::span<double> m, std::span<double> v, double lr, double b1,
               double b2, double eps, double wd, double bias_corr1,
               double bias_corr2);

}  // namespace fedsir::kern::avx2
#endif
