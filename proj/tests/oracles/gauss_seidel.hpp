#pragma once

#include <complex>
#include <vector>

#include "evgrid/grid_model.hpp"

namespace oracle {

struct GaussSeidelResult {
    std::vector<std::complex<double>> voltage;
    int iterations = 0;
    bool converged = false;
};

// Plain nodal admittance matrix in rectangular form, built without the
// library's assembly routine.
std::vector<std::vector<std::complex<double>>> admittance(const evgrid::grid::GridCase& grid);

// Gauss-Seidel power flow with over-relaxation on PQ buses. PV magnitudes
// are reset to their setpoint after every sweep.
GaussSeidelResult gauss_seidel(const evgrid::grid::GridCase& grid, double tol = 1e-13, int max_iter = 200000,
                               double accel = 1.4);

// S_i = V_i conj(sum_j Y_ij V_j), per-unit.
std::vector<std::complex<double>> nodal_power(const std::vector<std::vector<std::complex<double>>>& y,
                                              const std::vector<std::complex<double>>& v);

}  // namespace oracle
