#pragma once

#include <cstddef>

// Arithmetic primitives behind the descriptor pipeline. Every entry point
// dispatches at runtime to the best instruction set found on the host
// (scalar everywhere, AVX2+FMA on x86-64, NEON on aarch64). The scalar
// versions are the reference semantics; SIMD variants may reassociate
// additions, so results agree to rounding, not bit-for-bit.

namespace emk::kern {

enum class Isa { scalar, avx2, neon };

const char* isa_name(Isa isa);

// Instruction set currently used by the dispatched entry points.
Isa active_isa();

// True if this build and this CPU can run the given variant.
bool isa_available(Isa isa);

// Force a variant (tests use this to compare paths). Throws
// std::invalid_argument if the variant is unavailable.
void use_isa(Isa isa);

// Dispatched primitives.
double dot(const double* a, const double* b, std::size_t n);
double sum_sq(const double* a, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n); // y += alpha*x

// Compositions of the primitives above (row-major matrices).
void gemv(const double* a, std::size_t rows, std::size_t cols,
          const double* x, double* y);                       // y = A*x
void outer_acc(double alpha, const double* u, std::size_t un,
               const double* v, std::size_t vn, double* acc); // acc += alpha*u*v^T

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double sum_sq(const double* a, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
} // namespace scalar

#if defined(EMK_BUILD_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double sum_sq(const double* a, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
} // namespace avx2
#endif

#if defined(EMK_BUILD_NEON)
namespace neon {
double dot(const double* a, const double* b, std::size_t n);
double sum_sq(const double* a, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
} // namespace neon
#endif

} // namespace emk::kern
