#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

// Data-parallel inner loops of the scheduler. Every kernel has a scalar
// reference and optional vector variants; the active table is chosen once at
// startup from the CPU (override with EVGRID_KERNELS=scalar|avx2|neon).
//
// Elementwise kernels are bit-identical across variants. Reductions may
// differ by rounding only.

namespace evgrid::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view to_string(Isa isa);

struct KernelTable {
    Isa isa;
    // dst[t] += scale * src[t]
    void (*accumulate_scaled)(double* dst, const double* src, double scale, std::size_t n);
    // out[t] = x[t] - scale * y[t]
    void (*subtract_scaled)(double* out, const double* x, const double* y, double scale, std::size_t n);
    // out[t] = min(max(a[t] + shift, lo[t]), hi[t])
    void (*clamp_shift)(double* out, const double* a, double shift, const double* lo, const double* hi,
                        std::size_t n);
    // sum_t min(max(a[t] + shift, lo[t]), hi[t])
    double (*clamp_shift_sum)(const double* a, double shift, const double* lo, const double* hi, std::size_t n);
    // sum_t (a[t] + b[t])^2
    double (*sum_squares_of_sum)(const double* a, const double* b, std::size_t n);
    // max_t |a[t] - b[t]|
    double (*max_abs_diff)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_table();
/// nullptr when the variant is not compiled in or the CPU lacks it.
const KernelTable* table_for(Isa isa);
std::vector<Isa> available();

/// Process-wide selection.
const KernelTable& active();

// Span conveniences over active().
void accumulate_scaled(std::span<double> dst, std::span<const double> src, double scale);
void subtract_scaled(std::span<double> out, std::span<const double> x, std::span<const double> y, double scale);
void clamp_shift(std::span<double> out, std::span<const double> a, double shift, std::span<const double> lo,
                 std::span<const double> hi);
double clamp_shift_sum(std::span<const double> a, double shift, std::span<const double> lo,
                       std::span<const double> hi);
double sum_squares_of_sum(std::span<const double> a, std::span<const double> b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

namespace detail {
extern const KernelTable scalar;
#if defined(EVGRID_HAVE_AVX2)
extern const KernelTable avx2;
#endif
#if defined(EVGRID_HAVE_NEON)
extern const KernelTable neon;
#endif
}  // namespace detail

}  // namespace evgrid::kernels
