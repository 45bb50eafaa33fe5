#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#include "evgrid/kernels.hpp"

namespace evgrid::kernels {

std::string_view to_string(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
    }
    return "?";
}

const KernelTable& scalar_table() { return detail::scalar; }

const KernelTable* table_for(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return &detail::scalar;
        case Isa::Avx2:
#if defined(EVGRID_HAVE_AVX2)
            if (__builtin_cpu_supports("avx2")) return &detail::avx2;
#endif
            return nullptr;
        case Isa::Neon:
#if defined(EVGRID_HAVE_NEON)
            return &detail::neon;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

std::vector<Isa> available() {
    std::vector<Isa> out;
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
        if (table_for(isa)) out.push_back(isa);
    }
    return out;
}

namespace {

const KernelTable& select() {
    if (const char* env = std::getenv("EVGRID_KERNELS"); env && *env) {
        for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
            if (to_string(isa) == env) {
                if (const auto* t = table_for(isa)) return *t;
                throw std::runtime_error(std::string("EVGRID_KERNELS=") + env + " is not available on this CPU");
            }
        }
        throw std::runtime_error(std::string("unknown EVGRID_KERNELS value '") + env + "'");
    }
    if (const auto* t = table_for(Isa::Avx2)) return *t;
    if (const auto* t = table_for(Isa::Neon)) return *t;
    return detail::scalar;
}

}  // namespace

const KernelTable& active() {
    static const KernelTable& table = select();
    return table;
}

void accumulate_scaled(std::span<double> dst, std::span<const double> src, double scale) {
    active().accumulate_scaled(dst.data(), src.data(), scale, dst.size());
}

void subtract_scaled(std::span<double> out, std::span<const double> x, std::span<const double> y, double scale) {
    active().subtract_scaled(out.data(), x.data(), y.data(), scale, out.size());
}

void clamp_shift(std::span<double> out, std::span<const double> a, double shift, std::span<const double> lo,
                 std::span<const double> hi) {
    active().clamp_shift(out.data(), a.data(), shift, lo.data(), hi.data(), out.size());
}

double clamp_shift_sum(std::span<const double> a, double shift, std::span<const double> lo,
                       std::span<const double> hi) {
    return active().clamp_shift_sum(a.data(), shift, lo.data(), hi.data(), a.size());
}

double sum_squares_of_sum(std::span<const double> a, std::span<const double> b) {
    return active().sum_squares_of_sum(a.data(), b.data(), a.size());
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    return active().max_abs_diff(a.data(), b.data(), a.size());
}

}  // namespace evgrid::kernels
