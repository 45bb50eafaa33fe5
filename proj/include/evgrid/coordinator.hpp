#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "evgrid/base_load.hpp"
#include "evgrid/ev_fleet.hpp"
#include "evgrid/scheduler.hpp"

namespace evgrid::coordinator {

struct Broadcast {
    scheduler::ControlSignal signal;
};

struct ProfileUpdate {
    std::string ev_id;
    scheduler::ChargingProfile profile;
    int iteration = 0;
};

struct Converged {
    int iteration = 0;
};

using ProtocolMessage = std::variant<Broadcast, ProfileUpdate, Converged>;

/// Ordered record of every message exchanged in a round trip.
struct DeliveryLog {
    std::vector<ProtocolMessage> messages;

    /// kind,iteration,ev_id,values...  one line per message.
    std::string to_csv() const;
};

/// Carries broadcasts to charging stations and their profile updates back.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::vector<std::string> station_ids() const = 0;
    virtual std::vector<ProfileUpdate> deliver(const Broadcast& broadcast) = 0;
};

/// In-process stations. Each keeps its own previous profile and answers a
/// broadcast by solving its proximal subproblem.
class LoopbackTransport final : public Transport {
public:
    LoopbackTransport(std::vector<scheduler::StationProblem> problems, scheduler::SchedulerConfig config,
                      std::optional<std::vector<scheduler::ChargingProfile>> initial = std::nullopt);

    std::vector<std::string> station_ids() const override;
    std::vector<ProfileUpdate> deliver(const Broadcast& broadcast) override;

    /// Fault injection: a silent station drops broadcasts.
    void set_silent(const std::string& ev_id, bool silent = true);
    const std::vector<scheduler::ChargingProfile>& profiles() const noexcept { return profiles_; }

private:
    std::vector<scheduler::StationProblem> problems_;
    scheduler::SchedulerConfig config_;
    std::vector<scheduler::ChargingProfile> profiles_;
    std::set<std::string> silent_;
};

/// Sends one broadcast and returns the updates in station order. Throws
/// ProtocolError listing the stations that did not answer exactly once.
std::vector<scheduler::ChargingProfile> gather(Transport& transport, const Broadcast& broadcast,
                                               DeliveryLog* log = nullptr);

/// Runs each broadcast through gather, then appends Converged.
DeliveryLog transport_roundtrip(Transport& transport, std::span<const scheduler::ControlSignal> broadcasts);

/// Scheduler exchange backed by a transport.
scheduler::Exchange transport_exchange(Transport& transport, DeliveryLog* log = nullptr);

enum class EventKind { AddSession, UpdateEnergy, RemoveSession };

/// Scripted prediction update, known from `slot` onward. It takes effect at
/// the first horizon step starting at or after that slot.
struct PredictionEvent {
    int slot = 0;
    EventKind kind = EventKind::AddSession;
    std::string ev_id;
    std::optional<fleet::EvSession> session;  // AddSession
    std::optional<double> energy_kwh;         // UpdateEnergy
};

// Events file: slot,kind,ev_id,bus_id,t_start,t_end,energy_kwh,p_max_kw,d_max_kw
std::vector<PredictionEvent> read_events(std::istream& in, const std::string& source = "<events>");
std::vector<PredictionEvent> read_events_file(const std::filesystem::path& path);
std::string write_events(std::span<const PredictionEvent> events);

struct HorizonConfig {
    int steps = 24;
    /// 0 derives slots / steps.
    int slots_per_step = 0;

    int step_slots(int slots) const;
};

/// One control region (a load bus) after the last horizon step.
struct HorizonState {
    int bus_id = 0;
    int tau = 0;
    std::vector<fleet::EvSession> sessions;  // current predictions, ev_id order
    std::vector<scheduler::ChargingProfile> committed;
    std::vector<double> delivered_kwh;
    std::vector<bool> removed;
};

struct StepTrace {
    int bus_id = 0;
    int step = 0;
    int first_slot = 0;
    bool events_applied = false;
    scheduler::ConvergenceTrace trace;
};

struct RecedingHorizonResult {
    std::vector<HorizonState> regions;  // bus_id order
    std::vector<StepTrace> steps;
    std::vector<fleet::Flag> flags;

    std::vector<fleet::EvSession> sessions() const;
    std::vector<scheduler::ChargingProfile> committed() const;
};

/// Real-time loop: at each step apply due prediction updates, re-optimise
/// the remaining slots with elapsed ones frozen, and commit the step's
/// slots. Each load bus is coordinated by its own broadcast-gather loop.
RecedingHorizonResult run_receding_horizon(const fleet::FleetScenario& scenario, const metrics::BaseLoadProfile& base,
                                           const scheduler::SchedulerConfig& config, const HorizonConfig& horizon,
                                           std::span<const PredictionEvent> events = {});

}  // namespace evgrid::coordinator
