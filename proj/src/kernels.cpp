#include "fedsir/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_detail.hpp"

namespace fedsir::kern {

namespace {

struct Vtable {
    double (*dot)(std::span<const double>, std::span<const double>);
    void (*axpy)(double, std::span<const double>, std::span<double>);
    void (*scal)(double, std::span<double>);
    double (*sq_dist)(std::span<const double>, std::span<const double>);
    void (*matvec)(std::span<const double>, std::span<const double>,
                   std::span<double>, std::size_t, std::size_t);
    void (*matvec_t)(std::span<const double>, std::span<const double>,
                     std::span<double>, std::size_t, std::size_t);
    void (*ger)(double, std::span<const double>, std::span<const double>,
                std::span<double>, std::size_t, std::size_t);
    void (*adam_step)(std::span<double>, std::span<const double>,
                      std::span<double>, std::span<double>, double, double,
                      double, double, double, double, double);
};

constexpr Vtable kScalarVtable{ref::dot,    ref::axpy, ref::scal,
                               ref::sq_dist, ref::matvec, ref::matvec_t,
                               ref::ger,    ref::adam_step};

#if FEDSIR_HAVE_AVX2_TU
constexpr Vtable kAvx2Vtable{avx2::dot,    avx2::axpy, avx2::scal,
                             avx2::sq_dist, avx2::matvec, avx2::matvec_t,
                             avx2::ger,    avx2::adam_step};
#endif

Backend detect_backend() {
    if (const char* env = std::getenv("FEDSIR_KERNELS")) {
        const std::string want(env);
        if (want == "scalar") return Backend::kScalar;
        if (want == "avx2") {
            if (!avx2_available())
                throw std::runtime_error(
                    "FEDSIR_KERNELS=avx2 but the CPU lacks AVX2/FMA");
            return Backend::kAvx2;
        }
        throw std::runtime_error("FEDSIR_KERNELS must be 'scalar' or 'avx2'");
    }
    return avx2_available() ? Backend::kAvx2 : Backend::kScalar;
}

struct State {
    Backend backend = detect_backend();
    const Vtable* vt = nullptr;
    State() { select(backend); }
    void select(Backend b) {
        backend = b;
#if FEDSIR_HAVE_AVX2_TU
        vt = (b == Backend::kAvx2) ? &kAvx2Vtable : &kScalarVtable;
#else
        vt = &kScalarVtable;
#endif
    }
};

State& state() {
    static State s;
    return s;
}

}  // namespace

bool avx2_available() {
#if FEDSIR_HAVE_AVX2_TU
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend active_backend() { return state().backend; }

void set_backend(Backend b) {
    if (b == Backend::kAvx2 && !avx2_available())
        throw std::runtime_error("AVX2/FMA not available on this CPU");
    state().select(b);
}

std::string_view backend_name(Backend b) {
    return b == Backend::kAvx2 ? "avx2" : "scalar";
}

double dot(std::span<const double> a, std::span<const double> b) {
    return state().vt->dot(a, b);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    state().vt->axpy(alpha, x, y);
}

void scal(double alpha, std::span<double> x) { state().vt->scal(alpha, x); }

double sq_dist(std::span<const double> a, std::span<const double> b) {
    return state().vt->sq_dist(a, b);
}

void matvec(std::span<const double> w, std::span<const double> x,
            std::span<double> y, std::size_t rows, std::size_t cols) {
    state().vt->matvec(w, x, y, rows, cols);
}

void matvec_t(std::span<const double> w, std::span<const double> g,
              std::span<double> y, std::size_t rows, std::size_t cols) {
    state().vt->matvec_t(w, g, y, rows, cols);
}

void ger(double alpha, std::span<const double> g, std::span<const double> x,
         std::span<double> w, std::size_t rows, std::size_t cols) {
    state().vt->ger(alpha, g, x, w, rows, cols);
}

void adam_step(std::span<double> p, std::span<const double> g,
               std::span<double> m, std::span<double> v, double lr, double b1,
               double b2, double eps, double wd, double bias_corr1,
               double bias_corr2) {
    state().vt->adam_step(p, g, m, v, lr, b1, b2, eps, wd, bias_corr1,
                          bias_corr2);
}

}  // namespace fedsir::kern
