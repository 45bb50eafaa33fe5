#include "oracles/finite_difference.hpp"

#include <complex>

#include "oracles/gauss_seidel.hpp"

namespace oracle {

namespace {

std::vector<double> injections(const std::vector<std::vector<std::complex<double>>>& y,
                               const evgrid::powerflow::UnknownLayout& layout, const std::vector<double>& vm,
                               const std::vector<double>& va) {
    std::vector<std::complex<double>> v(vm.size());
    for (std::size_t i = 0; i < vm.size(); ++i) v[i] = std::polar(vm[i], va[i]);
    const auto s = nodal_power(y, v);
    std::vector<double> out;
    for (auto i : layout.angle_buses) out.push_back(s[i].real());
    for (auto i : layout.magnitude_buses) out.push_back(s[i].imag());
    return out;
}

}  // namespace

std::vector<std::vector<double>> jacobian_by_differences(const evgrid::grid::GridCase& grid,
                                                         const evgrid::powerflow::UnknownLayout& layout,
                                                         const std::vector<double>& v_mag,
                                                         const std::vector<double>& v_angle, double h) {
    const auto y = admittance(grid);
    const auto n = layout.size();
    std::vector<std::vector<double>> jac(n, std::vector<double>(n));
    for (std::size_t c = 0; c < n; ++c) {
        auto vm_plus = v_mag, vm_minus = v_mag, va_plus = v_angle, va_minus = v_angle;
        if (c < layout.angle_buses.size()) {
            const auto k = layout.angle_buses[c];
            va_plus[k] += h;
            va_minus[k] -= h;
        } else {
            const auto k = layout.magnitude_buses[c - layout.angle_buses.size()];
            vm_plus[k] += h;
            vm_minus[k] -= h;
        }
        const auto fp = injections(y, layout, vm_plus, va_plus);
        const auto fm = injections(y, layout, vm_minus, va_minus);
        for (std::size_t r = 0; r < n; ++r) jac[r][c] = (fp[r] - fm[r]) / (2.0 * h);
    }
    return jac;
}

}  // namespace oracle
