// AArch64 NEON variants, two doubles per register. The project builds with
// -ffp-contract=off so vmulq/vaddq stay separate roundings.

#include <arm_neon.h>

#include <cmath>

#include "evgrid/kernels.hpp"

namespace evgrid::kernels {

namespace nn {

inline double clamp(double x, double lo, double hi) {
    const double y = x > lo ? x : lo;
    return y < hi ? y : hi;
}

// Select form of the scalar comparison, so lanes match it bit for bit.
inline float64x2_t clamp2(float64x2_t x, float64x2_t lo, float64x2_t hi) {
    const float64x2_t y = vbslq_f64(vcgtq_f64(x, lo), x, lo);
    return vbslq_f64(vcltq_f64(y, hi), y, hi);
}

void accumulate_scaled(double* dst, const double* src, double scale, std::size_t n) {
    const float64x2_t k = vdupq_n_f64(scale);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(dst + i, vaddq_f64(vld1q_f64(dst + i), vmulq_f64(k, vld1q_f64(src + i))));
    }
    for (; i < n; ++i) dst[i] += scale * src[i];
}

void subtract_scaled(double* out, const double* x, const double* y, double scale, std::size_t n) {
    const float64x2_t k = vdupq_n_f64(scale);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(out + i, vsubq_f64(vld1q_f64(x + i), vmulq_f64(k, vld1q_f64(y + i))));
    }
    for (; i < n; ++i) out[i] = x[i] - scale * y[i];
}

void clamp_shift(double* out, const double* a, double shift, const double* lo, const double* hi, std::size_t n) {
    const float64x2_t s = vdupq_n_f64(shift);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(out + i, clamp2(vaddq_f64(vld1q_f64(a + i), s), vld1q_f64(lo + i), vld1q_f64(hi + i)));
    }
    for (; i < n; ++i) out[i] = clamp(a[i] + shift, lo[i], hi[i]);
}

double clamp_shift_sum(const double* a, double shift, const double* lo, const double* hi, std::size_t n) {
    const float64x2_t s = vdupq_n_f64(shift);
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        acc = vaddq_f64(acc, clamp2(vaddq_f64(vld1q_f64(a + i), s), vld1q_f64(lo + i), vld1q_f64(hi + i)));
    }
    double total = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) total += clamp(a[i] + shift, lo[i], hi[i]);
    return total;
}

double sum_squares_of_sum(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t v = vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        acc = vaddq_f64(acc, vmulq_f64(v, v));
    }
    double total = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) {
        const double v = a[i] + b[i];
        total += v * v;
    }
    return total;
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
    float64x2_t m = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        m = vmaxq_f64(m, vabdq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    }
    double best = vmaxvq_f64(m);
    for (; i < n; ++i) {
        const double d = std::fabs(a[i] - b[i]);
        best = d > best ? d : best;
    }
    return best;
}

}  // namespace nn

namespace detail {
const KernelTable neon{Isa::Neon,  &nn::accumulate_scaled,  &nn::subtract_scaled,
                       &nn::clamp_shift, &nn::clamp_shift_sum, &nn::sum_squares_of_sum,
                       &nn::max_abs_diff};
}  // namespace detail

}  // namespace evgrid::kernels
