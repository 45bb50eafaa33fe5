// Reference kernels. The clamp is written with the same operand order as
// the vector max/min instructions so elementwise results match bit for bit.

#include <cmath>

#include "evgrid/kernels.hpp"

namespace evgrid::kernels {

namespace ref {

inline double clamp(double x, double lo, double hi) {
    const double y = x > lo ? x : lo;
    return y < hi ? y : hi;
}

void accumulate_scaled(double* dst, const double* src, double scale, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += scale * src[i];
}

void subtract_scaled(double* out, const double* x, const double* y, double scale, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - scale * y[i];
}

void clamp_shift(double* out, const double* a, double shift, const double* lo, const double* hi, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = clamp(a[i] + shift, lo[i], hi[i]);
}

double clamp_shift_sum(const double* a, double shift, const double* lo, const double* hi, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += clamp(a[i] + shift, lo[i], hi[i]);
    return acc;
}

double sum_squares_of_sum(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = a[i] + b[i];
        acc += s * s;
    }
    return acc;
}

double max_abs_diff(const double* a, const double* b, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = std::fabs(a[i] - b[i]);
        m = d > m ? d : m;
    }
    return m;
}

}  // namespace ref

namespace detail {
const KernelTable scalar{Isa::Scalar,  &ref::accumulate_scaled,  &ref::subtract_scaled,
                         &ref::clamp_shift, &ref::clamp_shift_sum, &ref::sum_squares_of_sum,
                         &ref::max_abs_diff};
}  // namespace detail

}  // namespace evgrid::kernels
