#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "evgrid/coordinator.hpp"
#include "evgrid/ev_fleet.hpp"
#include "evgrid/metrics.hpp"
#include "evgrid/powerflow.hpp"
#include "evgrid/scheduler.hpp"

namespace evgrid::cli {

struct RunConfig {
    std::filesystem::path grid_case;
    std::filesystem::path base_load;
    /// Either a sessions file or a fleet-generation spec supplies the EVs.
    std::filesystem::path sessions;
    std::optional<fleet::FleetSpec> fleet;
    std::filesystem::path events;
    std::uint64_t seed = 1;
    scheduler::SchedulerConfig scheduler;
    coordinator::HorizonConfig horizon;
    powerflow::Options powerflow;
    metrics::ReactiveModel reactive;
    std::filesystem::path output_dir = "out";

    /// Checks parameter ranges and that every referenced path exists.
    void validate() const;
};

/// JSON configuration; relative paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace evgrid::cli
