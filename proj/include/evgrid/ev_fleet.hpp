#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evgrid/grid_model.hpp"

namespace evgrid::fleet {

/// One EV's predicted plug-in window [t_start, t_end) in slots, energy
/// demand and rate bounds. d_max_kw <= 0 is the V2G discharge limit.
struct EvSession {
    std::string ev_id;
    int bus_id = 0;
    int t_start = 0;
    int t_end = 0;
    double energy_kwh = 0.0;
    double p_max_kw = 6.6;
    double d_max_kw = -6.6;

    int window() const noexcept { return t_end - t_start; }
    double min_energy_kwh(double slot_hours) const noexcept { return d_max_kw * slot_hours * window(); }
    double max_energy_kwh(double slot_hours) const noexcept { return p_max_kw * slot_hours * window(); }

    bool operator==(const EvSession&) const = default;
};

/// Something the run adjusted rather than rejected.
struct Flag {
    std::string ev_id;
    std::string reason;
    int slot = -1;

    bool operator==(const Flag&) const = default;
};

/// Throws ValidationError unless the window lies in [0, slots] and the
/// demand is reachable within the rate bounds.
void validate_session(const EvSession& s, int slots, double slot_hours);

/// Moves energy into the feasible interval; returns true when it changed.
bool clamp_to_feasible(EvSession& s, double slot_hours);

struct HistoricalRecord {
    std::string ev_id;
    std::string date;
    int start_slot = 0;
    int end_slot = 0;
    double energy_kwh = 0.0;
};

struct FleetScenario {
    std::vector<EvSession> sessions;  // sorted by ev_id
    int slots = 96;
    double slot_hours = 0.25;
    std::map<int, int> per_bus_counts;
    std::vector<Flag> flags;

    /// Sorts sessions, recomputes per-bus counts and rejects duplicate ids.
    void normalize();
    std::vector<int> buses() const;
    std::vector<EvSession> sessions_on_bus(int bus_id) const;
};

void validate_scenario(const FleetScenario& scenario, const grid::GridCase& grid);

struct PredictionOptions {
    double p_max_kw = 6.6;
    double d_max_kw = -6.6;
    int default_bus = 0;
    std::map<std::string, int> bus_by_ev;
    /// EVs that must be predicted; empty means every EV in the history.
    std::vector<std::string> requested;
};

struct Prediction {
    std::vector<EvSession> sessions;
    std::vector<Flag> flags;
};

/// Per-EV arithmetic means of start, end and energy over the history.
Prediction predict_sessions(const std::vector<HistoricalRecord>& history, int slots, double slot_hours,
                            const PredictionOptions& options = {});

struct BusFleet {
    int bus_id = 0;
    int count = 0;
    double arrival_shift_slots = 0.0;
};

/// Distributions for synthetic sessions. Energy and rates are per vehicle;
/// each generated session aggregates `vehicles_per_session` identical
/// vehicles.
struct FleetSpec {
    int slots = 96;
    double slot_hours = 0.25;
    std::vector<BusFleet> buses;
    double arrival_mean_slot = 19.0;
    double arrival_std_slots = 4.0;
    int arrival_min_slot = 0;
    int arrival_max_slot = 40;
    double departure_mean_slot = 80.0;
    double departure_std_slots = 3.0;
    int min_window_slots = 16;
    double energy_min_kwh = 5.0;
    double energy_max_kwh = 9.0;
    double p_max_kw = 6.6;
    double d_max_kw = -6.6;
    int vehicles_per_session = 1;
};

void validate_fleet_spec(const FleetSpec& spec);

FleetScenario generate_fleet(std::uint64_t seed, const FleetSpec& spec);

/// Charge at p_max from plug-in until the demand is met; the last active
/// slot is fractional. Profile in kW over `slots`.
std::vector<double> uncoordinated_profile(const EvSession& session, int slots, double slot_hours);

// Sessions file: ev_id,bus_id,t_start,t_end,energy_kwh,p_max_kw,d_max_kw
std::vector<EvSession> read_sessions(std::istream& in, const std::string& source = "<sessions>");
std::vector<EvSession> read_sessions_file(const std::filesystem::path& path);
std::string write_sessions(const std::vector<EvSession>& sessions);

// History file: ev_id,date,start_slot,end_slot,energy_kwh
std::vector<HistoricalRecord> read_history(std::istream& in, const std::string& source = "<history>");
std::vector<HistoricalRecord> read_history_file(const std::filesystem::path& path);

}  // namespace evgrid::fleet
