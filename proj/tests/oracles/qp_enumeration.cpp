#include "oracles/qp_enumeration.hpp"

#include <cmath>
#include <limits>

namespace oracle {

double subproblem_cost(const std::vector<double>& p, const std::vector<double>& price,
                       const std::vector<double>& previous) {
    double c = 0.0;
    for (std::size_t t = 0; t < p.size(); ++t) c += price[t] * p[t] + 0.5 * (p[t] - previous[t]) * (p[t] - previous[t]);
    return c;
}

std::optional<std::vector<double>> solve_by_enumeration(const std::vector<double>& price,
                                                        const std::vector<double>& previous,
                                                        const std::vector<double>& lo, const std::vector<double>& hi,
                                                        double energy, double dt) {
    const std::size_t n = price.size();
    std::size_t combos = 1;
    for (std::size_t t = 0; t < n; ++t) combos *= 3;

    const double feas_tol = 1e-9;
    std::optional<std::vector<double>> best;
    double best_cost = std::numeric_limits<double>::infinity();
    std::vector<int> state(n);
    std::vector<double> p(n);
    for (std::size_t code = 0; code < combos; ++code) {
        std::size_t c = code;
        double fixed = 0.0;
        double free_anchor = 0.0;
        int free_count = 0;
        for (std::size_t t = 0; t < n; ++t) {
            state[t] = static_cast<int>(c % 3);
            c /= 3;
            if (state[t] == 0) {
                fixed += lo[t];
            } else if (state[t] == 1) {
                fixed += hi[t];
            } else {
                free_anchor += previous[t] - price[t];
                ++free_count;
            }
        }
        const double need = energy / dt - fixed;
        double shift = 0.0;
        if (free_count == 0) {
            if (std::abs(need) * dt > feas_tol) continue;
        } else {
            shift = (need - free_anchor) / free_count;
        }
        bool ok = true;
        for (std::size_t t = 0; t < n && ok; ++t) {
            if (state[t] == 0) {
                p[t] = lo[t];
            } else if (state[t] == 1) {
                p[t] = hi[t];
            } else {
                p[t] = previous[t] - price[t] + shift;
                ok = p[t] >= lo[t] - feas_tol && p[t] <= hi[t] + feas_tol;
            }
        }
        if (!ok) continue;
        const double cost = subproblem_cost(p, price, previous);
        if (cost < best_cost) {
            best_cost = cost;
            best = p;
        }
    }
    return best;
}

}  // namespace oracle
