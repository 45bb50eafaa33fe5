#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "evgrid/dense_lu.hpp"
#include "evgrid/grid_model.hpp"

namespace evgrid::powerflow {

struct Options {
    double tol = 1e-8;  // infinity norm of the mismatch vector, per-unit
    int max_iter = 20;
};

struct WarmStart {
    std::vector<double> v_mag;
    std::vector<double> v_angle;
};

/// Per-bus state indexed like GridCase::buses().
struct PowerFlowSolution {
    std::vector<double> v_mag;
    std::vector<double> v_angle;
    std::vector<double> p_inj;
    std::vector<double> q_inj;
    int iterations = 0;
    double max_mismatch = 0.0;
    /// Mismatch norm before each update, ending with the accepted one.
    std::vector<double> mismatch_history;
};

struct Injection {
    double p = 0.0;
    double q = 0.0;
};

/// Polar nodal power at bus index i:
///   P_i = V_i sum_j V_j |Y_ij| cos(theta_i - theta_j - alpha_ij)
///   Q_i = V_i sum_j V_j |Y_ij| sin(theta_i - theta_j - alpha_ij)
Injection compute_injection(std::span<const double> v_mag, std::span<const double> v_angle,
                            const grid::AdmittanceMatrix& ybus, std::size_t i);

/// Ordering of the Newton unknowns: angles of every non-swing bus, then
/// magnitudes of every PQ bus.
struct UnknownLayout {
    std::vector<std::size_t> angle_buses;
    std::vector<std::size_t> magnitude_buses;

    std::size_t size() const noexcept { return angle_buses.size() + magnitude_buses.size(); }
    static UnknownLayout for_case(const grid::GridCase& grid);
};

/// Analytic polar Jacobian d(P, Q)/d(theta, V) in the UnknownLayout order.
linalg::DenseMatrix build_jacobian(const UnknownLayout& layout, std::span<const double> v_mag,
                                   std::span<const double> v_angle, const grid::AdmittanceMatrix& ybus);

/// Specified minus computed injections (P rows for angle buses, Q rows for
/// magnitude buses).
std::vector<double> mismatch_vector(const grid::GridCase& grid, const UnknownLayout& layout,
                                    std::span<const double> v_mag, std::span<const double> v_angle,
                                    const grid::AdmittanceMatrix& ybus);

/// Newton-Raphson from a flat start (or `warm`). Throws ConvergenceError
/// when max_iter updates do not reach tol and SingularMatrixError on a
/// vanishing pivot. PV reactive limits are not enforced.
PowerFlowSolution solve_power_flow(const grid::GridCase& grid, const grid::AdmittanceMatrix& ybus,
                                   const Options& options = {}, const WarmStart* warm = nullptr);

struct LineFlow {
    std::size_t branch = 0;
    int from_bus = 0;
    int to_bus = 0;
    double i_from_pu = 0.0;
    double i_to_pu = 0.0;
    double i_from_amps = 0.0;
    double i_to_amps = 0.0;
    std::complex<double> s_from;  // MVA
    std::complex<double> s_to;    // MVA
    std::complex<double> loss;    // MVA
};

/// Base current in amperes for a bus voltage level.
double base_current_amps(double s_base_mva, double base_kv);

std::vector<LineFlow> compute_line_flows(const PowerFlowSolution& solution, const grid::GridCase& grid);

}  // namespace evgrid::powerflow
