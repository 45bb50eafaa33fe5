#include "evgrid/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "evgrid/error.hpp"

namespace evgrid::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
    if (!obj.is_object()) throw ParseError(where, "expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (!known.contains(key)) throw ParseError(where, "unknown key '" + key + "'");
    }
}

template <typename T>
void read(const json& obj, const char* key, T& target, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        target = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ParseError(where, std::string("key '") + key + "' has the wrong type");
    }
}

std::filesystem::path resolve(const std::filesystem::path& dir, const std::string& value) {
    if (value.empty()) return {};
    std::filesystem::path p(value);
    return p.is_absolute() ? p : (dir / p).lexically_normal();
}

fleet::FleetSpec read_fleet(const json& j, const std::string& where) {
    reject_unknown(j,
                   {"buses", "arrival_mean_slot", "arrival_std_slots", "arrival_min_slot", "arrival_max_slot",
                    "departure_mean_slot", "departure_std_slots", "min_window_slots", "energy_min_kwh",
                    "energy_max_kwh", "p_max_kw", "d_max_kw", "vehicles_per_session"},
                   where + ": fleet");
    fleet::FleetSpec spec;
    if (j.contains("buses")) {
        if (!j["buses"].is_array()) throw ParseError(where, "fleet.buses must be an array");
        for (const auto& b : j["buses"]) {
            reject_unknown(b, {"bus_id", "count", "arrival_shift_slots"}, where + ": fleet.buses");
            fleet::BusFleet bus;
            read(b, "bus_id", bus.bus_id, where);
            read(b, "count", bus.count, where);
            read(b, "arrival_shift_slots", bus.arrival_shift_slots, where);
            spec.buses.push_back(bus);
        }
    }
    read(j, "arrival_mean_slot", spec.arrival_mean_slot, where);
    read(j, "arrival_std_slots", spec.arrival_std_slots, where);
    read(j, "arrival_min_slot", spec.arrival_min_slot, where);
    read(j, "arrival_max_slot", spec.arrival_max_slot, where);
    read(j, "departure_mean_slot", spec.departure_mean_slot, where);
    read(j, "departure_std_slots", spec.departure_std_slots, where);
    read(j, "min_window_slots", spec.min_window_slots, where);
    read(j, "energy_min_kwh", spec.energy_min_kwh, where);
    read(j, "energy_max_kwh", spec.energy_max_kwh, where);
    read(j, "p_max_kw", spec.p_max_kw, where);
    read(j, "d_max_kw", spec.d_max_kw, where);
    read(j, "vehicles_per_session", spec.vehicles_per_session, where);
    return spec;
}

void require_file(const std::filesystem::path& p, const char* what) {
    if (!std::filesystem::is_regular_file(p)) {
        throw ValidationError(std::string(what) + " not found: " + p.string());
    }
}

}  // namespace

void RunConfig::validate() const {
    scheduler.validate();
    horizon.step_slots(scheduler.slots);
    reactive.validate();
    if (!(powerflow.tol > 0.0) || powerflow.max_iter < 1) {
        throw ValidationError("power flow: tol must be positive and max_iter >= 1");
    }
    require_file(grid_case, "grid case");
    require_file(base_load, "base load");
    if (!sessions.empty()) require_file(sessions, "sessions file");
    if (!sessions.empty() && fleet) throw ValidationError("give either a sessions file or a fleet spec, not both");
    if (!events.empty()) require_file(events, "events file");
    if (fleet) {
        auto spec = *fleet;
        spec.slots = scheduler.slots;
        spec.slot_hours = scheduler.slot_hours;
        fleet::validate_fleet_spec(spec);
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open configuration file");
    json j;
    try {
        j = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string(), e.what());
    }
    const std::string where = path.string();
    reject_unknown(j,
                   {"grid_case", "base_load", "sessions", "fleet", "events", "seed", "scheduler", "horizon",
                    "powerflow", "reactive", "output_dir"},
                   where);
    const auto dir = path.parent_path();

    RunConfig c;
    std::string s;
    s.clear(), read(j, "grid_case", s, where), c.grid_case = resolve(dir, s);
    s.clear(), read(j, "base_load", s, where), c.base_load = resolve(dir, s);
    s.clear(), read(j, "sessions", s, where), c.sessions = resolve(dir, s);
    s.clear(), read(j, "events", s, where), c.events = resolve(dir, s);
    s = "out", read(j, "output_dir", s, where), c.output_dir = resolve(dir, s);
    read(j, "seed", c.seed, where);
    if (j.contains("fleet")) c.fleet = read_fleet(j["fleet"], where);

    if (j.contains("scheduler")) {
        const auto& k = j["scheduler"];
        reject_unknown(k, {"lambda", "epsilon", "max_iterations", "slots", "slot_hours", "price_scale", "threads"},
                       where + ": scheduler");
        read(k, "lambda", c.scheduler.lambda, where);
        read(k, "epsilon", c.scheduler.epsilon, where);
        read(k, "max_iterations", c.scheduler.max_iterations, where);
        read(k, "slots", c.scheduler.slots, where);
        read(k, "slot_hours", c.scheduler.slot_hours, where);
        read(k, "price_scale", c.scheduler.price_scale, where);
        read(k, "threads", c.scheduler.threads, where);
    }
    if (j.contains("horizon")) {
        const auto& k = j["horizon"];
        reject_unknown(k, {"steps", "slots_per_step"}, where + ": horizon");
        read(k, "steps", c.horizon.steps, where);
        read(k, "slots_per_step", c.horizon.slots_per_step, where);
    }
    if (j.contains("powerflow")) {
        const auto& k = j["powerflow"];
        reject_unknown(k, {"tol", "max_iter"}, where + ": powerflow");
        read(k, "tol", c.powerflow.tol, where);
        read(k, "max_iter", c.powerflow.max_iter, where);
    }
    if (j.contains("reactive")) {
        const auto& k = j["reactive"];
        reject_unknown(k, {"base_power_factor", "ev_power_factor"}, where + ": reactive");
        read(k, "base_power_factor", c.reactive.base_power_factor, where);
        read(k, "ev_power_factor", c.reactive.ev_power_factor, where);
    }
    return c;
}

}  // namespace evgrid::cli
