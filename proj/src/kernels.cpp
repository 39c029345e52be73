#include "emk/kernels.hpp"

#include <stdexcept>

namespace emk::kern {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += a[i] * b[i];
    return acc;
}

double sum_sq(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        acc += a[i] * a[i];
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        y[i] += alpha * x[i];
}

} // namespace scalar

namespace {

struct Table {
    double (*dot)(const double*, const double*, std::size_t);
    double (*sum_sq)(const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
};

constexpr Table kScalarTable{&scalar::dot, &scalar::sum_sq, &scalar::axpy};

bool cpu_has_avx2() {
#if defined(EMK_BUILD_AVX2)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Table table_for(Isa isa) {
    switch (isa) {
    case Isa::scalar:
        return kScalarTable;
#if defined(EMK_BUILD_AVX2)
    case Isa::avx2:
        return Table{&avx2::dot, &avx2::sum_sq, &avx2::axpy};
#endif
#if defined(EMK_BUILD_NEON)
    case Isa::neon:
        return Table{&neon::dot, &neon::sum_sq, &neon::axpy};
#endif
    default:
        return kScalarTable;
    }
}

Isa detect_isa() {
#if defined(EMK_BUILD_NEON)
    return Isa::neon;
#endif
    if (cpu_has_avx2())
        return Isa::avx2;
    return Isa::scalar;
}

struct State {
    Isa isa;
    Table table;
    State() : isa(detect_isa()), table(table_for(isa)) {}
};

State& state() {
    static State s;
    return s;
}

} // namespace

const char* isa_name(Isa isa) {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
    }
    return "unknown";
}

Isa active_isa() { return state().isa; }

bool isa_available(Isa isa) {
    switch (isa) {
    case Isa::scalar:
        return true;
    case Isa::avx2:
        return cpu_has_avx2();
    case Isa::neon:
#if defined(EMK_BUILD_NEON)
        return true;
#else
        return false;
#endif
    }
    return false;
}

void use_isa(Isa isa) {
    if (!isa_available(isa))
        throw std::invalid_argument(std::string("instruction set not available: ") + isa_name(isa));
    state().isa = isa;
    state().table = table_for(isa);
}

double dot(const double* a, const double* b, std::size_t n) {
    return state().table.dot(a, b, n);
}

double sum_sq(const double* a, std::size_t n) {
    return state().table.sum_sq(a, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    state().table.axpy(alpha, x, y, n);
}

void gemv(const double* a, std::size_t rows, std::size_t cols,
          const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r)
        y[r] = dot(a + r * cols, x, cols);
}

void outer_acc(double alpha, const double* u, std::size_t un,
               const double* v, std::size_t vn, double* acc) {
    for (std::size_t r = 0; r < un; ++r)
        axpy(alpha * u[r], v, acc + r * vn, vn);
}

} // namespace emk::kern
