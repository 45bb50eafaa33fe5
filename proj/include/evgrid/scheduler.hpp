#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evgrid/ev_fleet.hpp"

namespace evgrid::scheduler {

struct SchedulerConfig {
    double lambda = 2.0;
    double epsilon = 1e-3;
    int max_iterations = 200;
    int slots = 96;
    double slot_hours = 0.25;
    /// Converts the MW-scale control signal into a price per kW of the
    /// station's decision variable (kW per MW).
    double price_scale = 1000.0;
    /// Worker threads for the station solves of one broadcast round.
    int threads = 1;

    void validate() const;
};

/// Per-slot charging power in kW; negative is V2G discharge.
struct ChargingProfile {
    std::vector<double> values;

    bool operator==(const ChargingProfile&) const = default;
};

struct ControlSignal {
    std::vector<double> values;
    int iteration = 0;
};

/// Box and energy constraints of one station's subproblem. Bounds are per
/// slot, zero outside the availability window; slots frozen by an earlier
/// commitment carry lower == upper.
struct StationProblem {
    std::string ev_id;
    std::vector<double> lower_kw;
    std::vector<double> upper_kw;
    double energy_kwh = 0.0;

    double min_energy_kwh(double slot_hours) const;
    double max_energy_kwh(double slot_hours) const;
};

StationProblem make_station_problem(const fleet::EvSession& session, int slots);

struct TraceEntry {
    int iteration = 0;
    double residual = 0.0;   // max_t |c^i(t) - c^{i-1}(t)|
    double objective = 0.0;  // sum_t (B(t) + sum_n p_n(t))^2, MW^2
};

struct ConvergenceTrace {
    std::vector<TraceEntry> entries;
    double initial_objective = 0.0;
    double final_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Iterations whose objective exceeded the previous iterate's.
    std::vector<int> objective_increases;
};

/// c(t) = (B(t) + sum_n p_n(t) / 1000) / (lambda N), profiles summed in order.
ControlSignal compute_control_signal(std::span<const double> base_mw, std::span<const ChargingProfile> profiles,
                                     double lambda, int iteration = 0);

/// Aggregate EV load in MW, summed in profile order.
std::vector<double> aggregate_mw(std::span<const ChargingProfile> profiles, std::size_t slots);

double flattening_objective(std::span<const double> base_mw, std::span<const ChargingProfile> profiles);

/// argmin_p  sum_t price_scale c(t) p(t) + 1/2 ||p - previous||^2
///   s.t. lower <= p <= upper,  sum_t p(t) slot_hours = energy.
/// Throws InfeasibleSessionError when the energy is unreachable.
ChargingProfile solve_station_subproblem(const ControlSignal& signal, const ChargingProfile& previous,
                                         const StationProblem& problem, const SchedulerConfig& config);

ChargingProfile solve_station_subproblem(const ControlSignal& signal, const ChargingProfile& previous,
                                         const fleet::EvSession& session, const SchedulerConfig& config);

/// Delivers one broadcast to every station and returns their updated
/// profiles in station order.
using Exchange = std::function<std::vector<ChargingProfile>(const ControlSignal& broadcast,
                                                            std::span<const ChargingProfile> previous)>;

/// In-process exchange: solves the stations on config.threads workers.
Exchange local_exchange(std::span<const StationProblem> problems, const SchedulerConfig& config);

/// Iteration state that can be continued: profiles answering `broadcast`.
struct ResumeState {
    std::vector<ChargingProfile> profiles;
    ControlSignal broadcast;
};

struct ScheduleResult {
    std::vector<ChargingProfile> profiles;
    ConvergenceTrace trace;
    ResumeState resume;
};

/// Broadcast-gather fixed-point iteration until max_t |c^{i+1} - c^i| <=
/// epsilon. Starts from all-zero profiles unless `initial` is given.
ScheduleResult run_until_converged(const SchedulerConfig& config, std::span<const double> base_mw,
                                   std::span<const StationProblem> problems,
                                   std::optional<std::vector<ChargingProfile>> initial = std::nullopt,
                                   Exchange exchange = nullptr);

/// Continues a previous run. When the problems are unchanged and the state
/// was converged, returns it untouched with zero iterations.
ScheduleResult resume_until_converged(const SchedulerConfig& config, std::span<const double> base_mw,
                                      std::span<const StationProblem> problems, ResumeState state,
                                      Exchange exchange = nullptr);

}  // namespace evgrid::scheduler
