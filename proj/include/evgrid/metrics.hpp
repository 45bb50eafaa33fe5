#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "evgrid/base_load.hpp"
#include "evgrid/ev_fleet.hpp"
#include "evgrid/grid_model.hpp"
#include "evgrid/powerflow.hpp"
#include "evgrid/scheduler.hpp"

namespace evgrid::metrics {

/// Reactive demand assumption: no Q data exists for the loads, so Q is
/// derived from P with a fixed power factor (lagging).
struct ReactiveModel {
    double base_power_factor = 0.95;
    double ev_power_factor = 1.0;

    void validate() const;
};

using BusSeries = std::map<int, std::vector<double>>;

/// Per-bus EV load in MW from kW profiles aligned with `sessions`.
BusSeries ev_load_by_bus(std::span<const fleet::EvSession> sessions,
                         std::span<const scheduler::ChargingProfile> profiles, int slots);

struct LoadTotals {
    int slots = 0;
    BusSeries p_mw;
    BusSeries q_mvar;

    std::vector<double> system_p() const;
};

/// Base plus EV load per bus. Buses without EVs keep their base load.
LoadTotals aggregate_load(const BaseLoadProfile& base, const BusSeries& ev_mw, const ReactiveModel& reactive = {});

struct GridEvaluation {
    int slot = 0;
    powerflow::PowerFlowSolution solution;
    std::vector<powerflow::LineFlow> flows;
};

/// Replaces each loaded bus's injection with -totals at `slot` and solves.
GridEvaluation evaluate_grid_at_slot(const grid::GridCase& grid, const LoadTotals& totals, int slot,
                                     const powerflow::Options& options = {},
                                     const powerflow::WarmStart* warm = nullptr);

/// argmax of the system total; ties resolve to the earliest slot.
int worst_slot(const LoadTotals& totals);

struct BusVoltage {
    int bus_id = 0;
    grid::BusKind kind = grid::BusKind::PQ;
    double before = 0.0;
    double after = 0.0;
};

struct BranchCurrent {
    int from_bus = 0;
    int to_bus = 0;
    bool line = true;
    double amps_before = 0.0;
    double amps_after = 0.0;
};

struct GeneratorOutput {
    int bus_id = 0;
    grid::BusKind kind = grid::BusKind::PV;
    double p_mw_before = 0.0;
    double q_mvar_before = 0.0;
    double p_mw_after = 0.0;
    double q_mvar_after = 0.0;
};

double percent_reduction(double before, double after);

struct ScenarioReport {
    double peak_before_mw = 0.0;
    double peak_after_mw = 0.0;
    double peak_shaving_pct = 0.0;
    int slot_before = 0;
    int slot_after = 0;
    std::vector<BusVoltage> voltages;
    std::vector<BranchCurrent> currents;
    /// Sum of from-side amperes over transmission lines (transformers excluded).
    double total_line_current_before_a = 0.0;
    double total_line_current_after_a = 0.0;
    double line_current_reduction_pct = 0.0;
    std::vector<GeneratorOutput> generation;
    std::vector<fleet::Flag> flags;
    std::vector<std::string> diagnostics;
    GridEvaluation before;
    GridEvaluation after;
};

/// Evaluates both scenarios at their own worst-case slot.
ScenarioReport compare_scenarios(const grid::GridCase& grid, const BaseLoadProfile& base,
                                 const BusSeries& uncoordinated_ev_mw, const BusSeries& coordinated_ev_mw,
                                 const ReactiveModel& reactive = {}, const powerflow::Options& options = {});

std::string report_json(const ScenarioReport& report);
std::string report_text(const ScenarioReport& report);

/// slot,base_mw,uncoordinated_total_mw,coordinated_total_mw
std::string plot_csv_system(const BaseLoadProfile& base, const LoadTotals& uncoordinated,
                            const LoadTotals& coordinated);
/// slot,bus_id,base_mw,uncoordinated_total_mw,coordinated_total_mw
std::string plot_csv_by_bus(const BaseLoadProfile& base, const LoadTotals& uncoordinated,
                            const LoadTotals& coordinated);

}  // namespace evgrid::metrics
