#include "emk/kernels.hpp"

#include <arm_neon.h>

namespace emk::kern::neon {

double dot(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    if (i + 2 <= n) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        i += 2;
    }
    double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i)
        sum += a[i] * b[i];
    return sum;
}

double sum_sq(const double* a, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t v = vld1q_f64(a + i);
        acc = vfmaq_f64(acc, v, v);
    }
    double sum = vaddvq_f64(acc);
    for (; i < n; ++i)
        sum += a[i] * a[i];
    return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vy = vld1q_f64(y + i);
        vy = vfmaq_f64(vy, va, vld1q_f64(x + i));
        vst1q_f64(y + i, vy);
    }
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

} // namespace emk::kern::neon
