// AVX2 variants, four doubles per lane group. Built with -mavx2 only (no
// FMA) so products and sums round exactly like the scalar reference.

#include <immintrin.h>

#include <cmath>

#include "evgrid/kernels.hpp"

namespace evgrid::kernels {

namespace avx {

inline double clamp(double x, double lo, double hi) {
    const double y = x > lo ? x : lo;
    return y < hi ? y : hi;
}

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void accumulate_scaled(double* dst, const double* src, double scale, std::size_t n) {
    const __m256d k = _mm256_set1_pd(scale);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_loadu_pd(dst + i);
        const __m256d s = _mm256_mul_pd(k, _mm256_loadu_pd(src + i));
        _mm256_storeu_pd(dst + i, _mm256_add_pd(d, s));
    }
    for (; i < n; ++i) dst[i] += scale * src[i];
}

void subtract_scaled(double* out, const double* x, const double* y, double scale, std::size_t n) {
    const __m256d k = _mm256_set1_pd(scale);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d p = _mm256_mul_pd(k, _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), p));
    }
    for (; i < n; ++i) out[i] = x[i] - scale * y[i];
}

void clamp_shift(double* out, const double* a, double shift, const double* lo, const double* hi, std::size_t n) {
    const __m256d s = _mm256_set1_pd(shift);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_add_pd(_mm256_loadu_pd(a + i), s);
        v = _mm256_max_pd(v, _mm256_loadu_pd(lo + i));
        v = _mm256_min_pd(v, _mm256_loadu_pd(hi + i));
        _mm256_storeu_pd(out + i, v);
    }
    for (; i < n; ++i) out[i] = clamp(a[i] + shift, lo[i], hi[i]);
}

double clamp_shift_sum(const double* a, double shift, const double* lo, const double* hi, std::size_t n) {
    const __m256d s = _mm256_set1_pd(shift);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_add_pd(_mm256_loadu_pd(a + i), s);
        v = _mm256_max_pd(v, _mm256_loadu_pd(lo + i));
        v = _mm256_min_pd(v, _mm256_loadu_pd(hi + i));
        acc = _mm256_add_pd(acc, v);
    }
    double total = hsum(acc);
    for (; i < n; ++i) total += clamp(a[i] + shift, lo[i], hi[i]);
    return total;
}

double sum_squares_of_sum(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
    }
    double total = hsum(acc);
    for (; i < n; ++i) {
        const double v = a[i] + b[i];
        total += v * v;
    }
    return total;
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
    const __m256d sign = _mm256_set1_pd(-0.0);
    __m256d m = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        m = _mm256_max_pd(m, _mm256_andnot_pd(sign, d));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, m);
    double best = 0.0;
    for (double v : lanes) best = v > best ? v : best;
    for (; i < n; ++i) {
        const double d = std::fabs(a[i] - b[i]);
        best = d > best ? d : best;
    }
    return best;
}

}  // namespace avx

namespace detail {
const KernelTable avx2{Isa::Avx2,  &avx::accumulate_scaled,  &avx::subtract_scaled,
                       &avx::clamp_shift, &avx::clamp_shift_sum, &avx::sum_squares_of_sum,
                       &avx::max_abs_diff};
}  // namespace detail

}  // namespace evgrid::kernels
