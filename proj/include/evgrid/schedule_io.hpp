#pragma once

#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "evgrid/coordinator.hpp"
#include "evgrid/ev_fleet.hpp"
#include "evgrid/grid_model.hpp"
#include "evgrid/scheduler.hpp"

namespace evgrid::io {

struct ScheduleRow {
    std::string ev_id;
    int bus_id = 0;
    scheduler::ChargingProfile profile;
};

// Schedules file: ev_id,bus_id,kw_0,...,kw_{T-1}
std::string write_schedules(std::span<const fleet::EvSession> sessions,
                            std::span<const scheduler::ChargingProfile> profiles);
std::vector<ScheduleRow> read_schedules(std::istream& in, const std::string& source = "<schedules>");
std::vector<ScheduleRow> read_schedules_file(const std::filesystem::path& path);

// Trace file: bus_id,step,first_slot,events_applied,iteration,residual,objective
std::string write_trace(std::span<const coordinator::StepTrace> steps);

// Injection snapshot: bus_id,p_inj_mw,q_inj_mvar[,v_mag] with net injections in
// the generator convention. Converted to per-unit on `s_base_mva`.
std::vector<grid::InjectionOverride> read_snapshot(std::istream& in, double s_base_mva,
                                                   const std::string& source = "<snapshot>");
std::vector<grid::InjectionOverride> read_snapshot_file(const std::filesystem::path& path, double s_base_mva);

/// Writes `text` to `path`, throwing Error when the file cannot be written.
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace evgrid::io
