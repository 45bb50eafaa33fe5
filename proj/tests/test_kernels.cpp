#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "evgrid/kernels.hpp"

using namespace evgrid::kernels;

namespace {

struct Inputs {
    std::vector<double> a, b, lo, hi;
};

Inputs random_inputs(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-500.0, 500.0);
    Inputs in;
    for (std::size_t i = 0; i < n; ++i) {
        in.a.push_back(u(rng));
        in.b.push_back(u(rng));
        double l = u(rng), h = u(rng);
        if (l > h) std::swap(l, h);
        if (i % 7 == 0) h = l;  // pinned slot
        in.lo.push_back(l);
        in.hi.push_back(h);
    }
    return in;
}

bool same_bits(const std::vector<double>& x, const std::vector<double>& y) {
    return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
}

std::vector<const KernelTable*> variants() {
    std::vector<const KernelTable*> out;
    for (auto isa : available()) {
        if (isa != Isa::Scalar) out.push_back(table_for(isa));
    }
    return out;
}

}  // namespace

TEST_CASE("scalar table is always available and listed first") {
    const auto isas = available();
    REQUIRE_FALSE(isas.empty());
    CHECK(isas.front() == Isa::Scalar);
    CHECK(table_for(Isa::Scalar) == &scalar_table());
    MESSAGE("active kernels: " << to_string(active().isa));
}

TEST_CASE("vector kernels match the scalar reference") {
    const auto& ref = scalar_table();
    std::mt19937_64 rng(3);
    for (const auto* k : variants()) {
        CAPTURE(to_string(k->isa));
        for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 96u, 97u, 1001u}) {
            CAPTURE(n);
            for (int rep = 0; rep < 5; ++rep) {
                const auto in = random_inputs(n, rng);
                const double shift = std::uniform_real_distribution<double>(-300, 300)(rng);
                const double scale = std::uniform_real_distribution<double>(-3, 3)(rng);

                auto d1 = in.a, d2 = in.a;
                ref.accumulate_scaled(d1.data(), in.b.data(), scale, n);
                k->accumulate_scaled(d2.data(), in.b.data(), scale, n);
                CHECK(same_bits(d1, d2));

                std::vector<double> o1(n), o2(n);
                ref.subtract_scaled(o1.data(), in.a.data(), in.b.data(), scale, n);
                k->subtract_scaled(o2.data(), in.a.data(), in.b.data(), scale, n);
                CHECK(same_bits(o1, o2));

                ref.clamp_shift(o1.data(), in.a.data(), shift, in.lo.data(), in.hi.data(), n);
                k->clamp_shift(o2.data(), in.a.data(), shift, in.lo.data(), in.hi.data(), n);
                CHECK(same_bits(o1, o2));

                double mag = 1.0;
                for (double v : o1) mag += std::abs(v);
                const double s1 = ref.clamp_shift_sum(in.a.data(), shift, in.lo.data(), in.hi.data(), n);
                const double s2 = k->clamp_shift_sum(in.a.data(), shift, in.lo.data(), in.hi.data(), n);
                CHECK(std::abs(s1 - s2) <= 1e-13 * mag);

                double sq = 1.0;
                for (std::size_t i = 0; i < n; ++i) sq += (in.a[i] + in.b[i]) * (in.a[i] + in.b[i]);
                const double q1 = ref.sum_squares_of_sum(in.a.data(), in.b.data(), n);
                const double q2 = k->sum_squares_of_sum(in.a.data(), in.b.data(), n);
                CHECK(std::abs(q1 - q2) <= 1e-13 * sq);

                // A maximum involves no rounding, so it matches exactly.
                CHECK(ref.max_abs_diff(in.a.data(), in.b.data(), n) == k->max_abs_diff(in.a.data(), in.b.data(), n));
            }
        }
    }
}

TEST_CASE("clamp keeps pinned slots at their bound") {
    const std::vector<double> a{10, -10, 0.5};
    const std::vector<double> lo{2, 2, -1};
    const std::vector<double> hi{2, 2, 1};
    for (auto isa : available()) {
        const auto* k = table_for(isa);
        std::vector<double> out(3);
        k->clamp_shift(out.data(), a.data(), 0.25, lo.data(), hi.data(), 3);
        CHECK(out == std::vector<double>{2, 2, 0.75});
    }
}

TEST_CASE("span wrappers route to the active table") {
    std::vector<double> dst{1, 2, 3, 4, 5};
    const std::vector<double> src{1, 1, 1, 1, 1};
    accumulate_scaled(dst, src, 0.5);
    CHECK(dst == std::vector<double>{1.5, 2.5, 3.5, 4.5, 5.5});
    CHECK(max_abs_diff(dst, src) == 4.5);
    CHECK(sum_squares_of_sum(src, src) == 20.0);
}
