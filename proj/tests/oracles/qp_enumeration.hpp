#pragma once

#include <optional>
#include <vector>

namespace oracle {

// argmin sum_t price(t) p(t) + 1/2 ||p - previous||^2 subject to
// lo <= p <= hi and dt * sum_t p(t) = energy, by trying every assignment of
// slots to {lower, upper, free}. Each assignment fixes the free slots to a
// common shift of previous - price; the cheapest feasible candidate wins.
// Exponential in the slot count; meant for T <= 10.
std::optional<std::vector<double>> solve_by_enumeration(const std::vector<double>& price,
                                                        const std::vector<double>& previous,
                                                        const std::vector<double>& lo, const std::vector<double>& hi,
                                                        double energy, double dt);

double subproblem_cost(const std::vector<double>& p, const std::vector<double>& price,
                       const std::vector<double>& previous);

}  // namespace oracle
