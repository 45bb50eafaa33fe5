#include "evgrid/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "evgrid/error.hpp"

namespace evgrid::powerflow {

using grid::BusKind;

Injection compute_injection(std::span<const double> v_mag, std::span<const double> v_angle,
                            const grid::AdmittanceMatrix& ybus, std::size_t i) {
    double p = 0.0;
    double q = 0.0;
    for (std::size_t j = 0; j < ybus.order(); ++j) {
        const auto& y = ybus(i, j);
        if (y == std::complex<double>{}) continue;
        const double delta = v_angle[i] - v_angle[j] - std::arg(y);
        const double w = v_mag[j] * std::abs(y);
        p += w * std::cos(delta);
        q += w * std::sin(delta);
    }
    return {v_mag[i] * p, v_mag[i] * q};
}

UnknownLayout UnknownLayout::for_case(const grid::GridCase& grid) {
    UnknownLayout layout;
    const auto& buses = grid.buses();
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].kind != BusKind::Swing) layout.angle_buses.push_back(i);
    }
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].kind == BusKind::PQ) layout.magnitude_buses.push_back(i);
    }
    return layout;
}

linalg::DenseMatrix build_jacobian(const UnknownLayout& layout, std::span<const double> v_mag,
                                   std::span<const double> v_angle, const grid::AdmittanceMatrix& ybus) {
    const std::size_t m = ybus.order();
    std::vector<Injection> s(m);
    for (std::size_t i = 0; i < m; ++i) s[i] = compute_injection(v_mag, v_angle, ybus, i);

    const std::size_t na = layout.angle_buses.size();
    linalg::DenseMatrix jac(layout.size());

    // Rows: P at angle buses, then Q at magnitude buses.
    // Columns: theta at angle buses, then V at magnitude buses.
    const auto fill = [&](std::size_t row, std::size_t i, bool is_p) {
        const double gii = ybus(i, i).real();
        const double bii = ybus(i, i).imag();
        const auto term = [&](std::size_t j) {
            const auto& y = ybus(i, j);
            const double delta = v_angle[i] - v_angle[j] - std::arg(y);
            return std::pair{std::abs(y) * std::cos(delta), std::abs(y) * std::sin(delta)};
        };
        for (std::size_t c = 0; c < na; ++c) {
            const std::size_t j = layout.angle_buses[c];
            double d;
            if (j == i) {
                d = is_p ? -s[i].q - v_mag[i] * v_mag[i] * bii : s[i].p - v_mag[i] * v_mag[i] * gii;
            } else {
                const auto [yc, ys] = term(j);
                d = is_p ? v_mag[i] * v_mag[j] * ys : -v_mag[i] * v_mag[j] * yc;
            }
            jac(row, c) = d;
        }
        for (std::size_t c = 0; c < layout.magnitude_buses.size(); ++c) {
            const std::size_t j = layout.magnitude_buses[c];
            double d;
            if (j == i) {
                d = is_p ? s[i].p / v_mag[i] + v_mag[i] * gii : s[i].q / v_mag[i] - v_mag[i] * bii;
            } else {
                const auto [yc, ys] = term(j);
                d = is_p ? v_mag[i] * yc : v_mag[i] * ys;
            }
            jac(row, na + c) = d;
        }
    };
    for (std::size_t r = 0; r < na; ++r) fill(r, layout.angle_buses[r], true);
    for (std::size_t r = 0; r < layout.magnitude_buses.size(); ++r) fill(na + r, layout.magnitude_buses[r], false);
    return jac;
}

std::vector<double> mismatch_vector(const grid::GridCase& grid, const UnknownLayout& layout,
                                    std::span<const double> v_mag, std::span<const double> v_angle,
                                    const grid::AdmittanceMatrix& ybus) {
    std::vector<double> f;
    f.reserve(layout.size());
    for (auto i : layout.angle_buses) f.push_back(grid.buses()[i].p_inj - compute_injection(v_mag, v_angle, ybus, i).p);
    for (auto i : layout.magnitude_buses) {
        f.push_back(grid.buses()[i].q_inj - compute_injection(v_mag, v_angle, ybus, i).q);
    }
    return f;
}

namespace {
double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}
}  // namespace

PowerFlowSolution solve_power_flow(const grid::GridCase& grid, const grid::AdmittanceMatrix& ybus,
                                   const Options& options, const WarmStart* warm) {
    if (!(options.tol > 0.0)) throw ValidationError("power-flow tolerance must be positive");
    if (options.max_iter < 1) throw ValidationError("power-flow max_iter must be at least 1");
    if (ybus.order() != grid.size()) throw ValidationError("admittance matrix order does not match the case");

    const auto& buses = grid.buses();
    const std::size_t m = buses.size();
    std::vector<double> vm(m, 1.0);
    std::vector<double> va(m, 0.0);
    if (warm) {
        if (warm->v_mag.size() != m || warm->v_angle.size() != m) throw ValidationError("warm start has wrong size");
        vm = warm->v_mag;
        va = warm->v_angle;
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (buses[i].kind != BusKind::PQ) vm[i] = buses[i].v_mag;
        if (buses[i].kind == BusKind::Swing) va[i] = buses[i].v_angle;
    }

    const auto layout = UnknownLayout::for_case(grid);
    const std::size_t na = layout.angle_buses.size();
    PowerFlowSolution sol;

    int iter = 0;
    while (true) {
        const auto f = mismatch_vector(grid, layout, vm, va, ybus);
        const double norm = inf_norm(f);
        sol.mismatch_history.push_back(norm);
        if (!std::isfinite(norm)) {
            throw ConvergenceError("power flow diverged at iteration " + std::to_string(iter), iter, norm);
        }
        if (norm <= options.tol) {
            sol.max_mismatch = norm;
            break;
        }
        if (iter == options.max_iter) {
            std::ostringstream os;
            os << "power flow did not converge in " << options.max_iter << " iterations (final mismatch " << norm
               << " pu)";
            throw ConvergenceError(os.str(), iter, norm);
        }
        const auto jac = build_jacobian(layout, vm, va, ybus);
        const auto dx = linalg::lu_solve(jac, f, 1e-12, iter + 1);
        for (std::size_t c = 0; c < na; ++c) va[layout.angle_buses[c]] += dx[c];
        for (std::size_t c = 0; c < layout.magnitude_buses.size(); ++c) vm[layout.magnitude_buses[c]] += dx[na + c];
        ++iter;
    }

    sol.iterations = iter;
    sol.v_mag = vm;
    sol.v_angle = va;
    sol.p_inj.resize(m);
    sol.q_inj.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const auto s = compute_injection(vm, va, ybus, i);
        sol.p_inj[i] = s.p;
        sol.q_inj[i] = s.q;
    }
    return sol;
}

double base_current_amps(double s_base_mva, double base_kv) {
    // MVA / kV = kA
    return s_base_mva / (std::sqrt(3.0) * base_kv) * 1000.0;
}

std::vector<LineFlow> compute_line_flows(const PowerFlowSolution& solution, const grid::GridCase& grid) {
    std::vector<LineFlow> flows;
    flows.reserve(grid.branches().size());
    const double sb = grid.s_base();
    for (std::size_t k = 0; k < grid.branches().size(); ++k) {
        const auto& br = grid.branches()[k];
        const auto f = grid.index_of(br.from_bus);
        const auto t = grid.index_of(br.to_bus);
        const auto vf = std::polar(solution.v_mag[f], solution.v_angle[f]);
        const auto vt = std::polar(solution.v_mag[t], solution.v_angle[t]);
        const auto ys = br.series_admittance();
        const std::complex<double> half_shunt(0.0, br.b_shunt / 2.0);

        const auto i_from = (ys / (br.tap * br.tap) + half_shunt) * vf - ys / br.tap * vt;
        const auto i_to = -ys / br.tap * vf + (ys + half_shunt) * vt;

        LineFlow lf;
        lf.branch = k;
        lf.from_bus = br.from_bus;
        lf.to_bus = br.to_bus;
        lf.i_from_pu = std::abs(i_from);
        lf.i_to_pu = std::abs(i_to);
        lf.i_from_amps = lf.i_from_pu * base_current_amps(sb, grid.buses()[f].base_kv);
        lf.i_to_amps = lf.i_to_pu * base_current_amps(sb, grid.buses()[t].base_kv);
        lf.s_from = vf * std::conj(i_from) * sb;
        lf.s_to = vt * std::conj(i_to) * sb;
        lf.loss = lf.s_from + lf.s_to;
        flows.push_back(lf);
    }
    return flows;
}

}  // namespace evgrid::powerflow
