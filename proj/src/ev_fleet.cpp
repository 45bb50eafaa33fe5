#include "evgrid/ev_fleet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "evgrid/csv.hpp"
#include "evgrid/error.hpp"

namespace evgrid::fleet {

namespace {
// Slack for comparing energies computed along different arithmetic paths.
constexpr double kEnergySlack = 1e-9;
}  // namespace

void validate_session(const EvSession& s, int slots, double slot_hours) {
    const std::string label = "session " + s.ev_id;
    if (s.ev_id.empty()) throw ValidationError("session with empty ev_id");
    if (!(0 <= s.t_start && s.t_start < s.t_end && s.t_end <= slots)) {
        throw ValidationError(label + ": window [" + std::to_string(s.t_start) + ", " + std::to_string(s.t_end) +
                              ") must satisfy 0 <= t_start < t_end <= " + std::to_string(slots));
    }
    if (s.p_max_kw < 0.0) throw ValidationError(label + ": p_max_kw must be >= 0");
    if (s.d_max_kw > 0.0) throw ValidationError(label + ": d_max_kw must be <= 0");
    const double lo = s.min_energy_kwh(slot_hours);
    const double hi = s.max_energy_kwh(slot_hours);
    if (s.energy_kwh < lo - kEnergySlack || s.energy_kwh > hi + kEnergySlack) {
        throw InfeasibleSessionError(s.ev_id, s.energy_kwh, lo, hi);
    }
}

bool clamp_to_feasible(EvSession& s, double slot_hours) {
    const double lo = s.min_energy_kwh(slot_hours);
    const double hi = s.max_energy_kwh(slot_hours);
    const double e = std::clamp(s.energy_kwh, lo, hi);
    if (e == s.energy_kwh) return false;
    s.energy_kwh = e;
    return true;
}

void FleetScenario::normalize() {
    std::sort(sessions.begin(), sessions.end(),
              [](const EvSession& a, const EvSession& b) { return a.ev_id < b.ev_id; });
    for (std::size_t i = 1; i < sessions.size(); ++i) {
        if (sessions[i].ev_id == sessions[i - 1].ev_id) {
            throw ValidationError("duplicate ev_id " + sessions[i].ev_id);
        }
    }
    per_bus_counts.clear();
    for (const auto& s : sessions) ++per_bus_counts[s.bus_id];
}

std::vector<int> FleetScenario::buses() const {
    std::vector<int> out;
    for (const auto& [bus, count] : per_bus_counts) {
        if (count > 0) out.push_back(bus);
    }
    return out;
}

std::vector<EvSession> FleetScenario::sessions_on_bus(int bus_id) const {
    std::vector<EvSession> out;
    for (const auto& s : sessions) {
        if (s.bus_id == bus_id) out.push_back(s);
    }
    return out;
}

void validate_scenario(const FleetScenario& scenario, const grid::GridCase& grid) {
    std::map<int, int> counts;
    for (const auto& s : scenario.sessions) {
        if (!grid.has_bus(s.bus_id)) {
            throw ValidationError("session " + s.ev_id + ": bus " + std::to_string(s.bus_id) + " is not in the grid case");
        }
        validate_session(s, scenario.slots, scenario.slot_hours);
        ++counts[s.bus_id];
    }
    for (const auto& [bus, count] : scenario.per_bus_counts) {
        const int actual = counts.contains(bus) ? counts[bus] : 0;
        if (actual != count) {
            throw ValidationError("per-bus count for bus " + std::to_string(bus) + " is " + std::to_string(count) +
                                  " but the session list has " + std::to_string(actual));
        }
    }
    for (const auto& [bus, count] : counts) {
        if (!scenario.per_bus_counts.contains(bus)) {
            throw ValidationError("bus " + std::to_string(bus) + " has sessions but no per-bus count");
        }
    }
}

Prediction predict_sessions(const std::vector<HistoricalRecord>& history, int slots, double slot_hours,
                            const PredictionOptions& options) {
    if (slots < 1 || !(slot_hours > 0.0)) throw ValidationError("prediction needs slots >= 1 and slot_hours > 0");

    std::map<std::string, std::vector<HistoricalRecord>> by_ev;
    for (const auto& r : history) {
        if (!(r.start_slot < r.end_slot)) {
            throw ValidationError("history record for " + r.ev_id + " has start_slot >= end_slot");
        }
        if (r.energy_kwh < 0.0) throw ValidationError("history record for " + r.ev_id + " has negative energy");
        by_ev[r.ev_id].push_back(r);
    }

    std::vector<std::string> ids = options.requested;
    if (ids.empty()) {
        for (const auto& [id, records] : by_ev) ids.push_back(id);
    }

    Prediction out;
    for (const auto& id : ids) {
        auto it = by_ev.find(id);
        if (it == by_ev.end() || it->second.empty()) {
            throw ValidationError("no charging history for EV " + id);
        }
        auto records = it->second;
        // Canonical order makes the floating-point means independent of the
        // order the records arrived in.
        std::sort(records.begin(), records.end(), [](const HistoricalRecord& a, const HistoricalRecord& b) {
            return std::tie(a.date, a.start_slot, a.end_slot, a.energy_kwh) <
                   std::tie(b.date, b.start_slot, b.end_slot, b.energy_kwh);
        });
        double start = 0.0;
        double end = 0.0;
        double energy = 0.0;
        for (const auto& r : records) {
            start += r.start_slot;
            end += r.end_slot;
            energy += r.energy_kwh;
        }
        const double n = static_cast<double>(records.size());

        EvSession s;
        s.ev_id = id;
        auto bus = options.bus_by_ev.find(id);
        s.bus_id = bus != options.bus_by_ev.end() ? bus->second : options.default_bus;
        s.t_start = std::clamp(static_cast<int>(std::lround(start / n)), 0, slots - 1);
        s.t_end = std::clamp(static_cast<int>(std::lround(end / n)), s.t_start + 1, slots);
        s.energy_kwh = energy / n;
        s.p_max_kw = options.p_max_kw;
        s.d_max_kw = options.d_max_kw;
        if (clamp_to_feasible(s, slot_hours)) {
            out.flags.push_back({id, "predicted energy clamped to the feasible interval", -1});
        }
        out.sessions.push_back(std::move(s));
    }
    return out;
}

void validate_fleet_spec(const FleetSpec& spec) {
    const auto fail = [](const std::string& what) { throw ValidationError("fleet spec: " + what); };
    if (spec.slots < 1) fail("slots must be >= 1");
    if (!(spec.slot_hours > 0.0)) fail("slot_hours must be positive");
    std::set<int> seen;
    for (const auto& b : spec.buses) {
        if (b.count < 0) fail("count for bus " + std::to_string(b.bus_id) + " is negative");
        if (!seen.insert(b.bus_id).second) fail("bus " + std::to_string(b.bus_id) + " listed twice");
    }
    if (spec.arrival_std_slots < 0.0 || spec.departure_std_slots < 0.0) fail("standard deviations must be >= 0");
    if (spec.arrival_min_slot < 0 || spec.arrival_min_slot > spec.arrival_max_slot) {
        fail("arrival bounds must satisfy 0 <= min <= max");
    }
    if (spec.min_window_slots < 1) fail("min_window_slots must be >= 1");
    if (spec.arrival_max_slot + spec.min_window_slots > spec.slots) {
        fail("latest arrival plus the minimum window exceeds the horizon");
    }
    if (spec.energy_min_kwh < 0.0 || spec.energy_min_kwh > spec.energy_max_kwh) {
        fail("energy bounds must satisfy 0 <= min <= max");
    }
    if (spec.p_max_kw < 0.0 || spec.d_max_kw > 0.0) fail("rates must satisfy p_max >= 0 >= d_max");
    if (spec.vehicles_per_session < 1) fail("vehicles_per_session must be >= 1");
    if (spec.energy_min_kwh > spec.p_max_kw * spec.slot_hours * spec.min_window_slots + kEnergySlack) {
        fail("minimum energy cannot be delivered within the minimum window at p_max");
    }
}

FleetScenario generate_fleet(std::uint64_t seed, const FleetSpec& spec) {
    validate_fleet_spec(spec);
    FleetScenario scenario;
    scenario.slots = spec.slots;
    scenario.slot_hours = spec.slot_hours;

    std::mt19937_64 rng(seed);
    const double scale = spec.vehicles_per_session;
    for (const auto& bus : spec.buses) {
        std::normal_distribution<double> arrival(spec.arrival_mean_slot + bus.arrival_shift_slots,
                                                 spec.arrival_std_slots);
        std::normal_distribution<double> departure(spec.departure_mean_slot, spec.departure_std_slots);
        std::uniform_real_distribution<double> energy(spec.energy_min_kwh, spec.energy_max_kwh);
        for (int k = 0; k < bus.count; ++k) {
            EvSession s;
            char id[32];
            std::snprintf(id, sizeof id, "b%d-%04d", bus.bus_id, k + 1);
            s.ev_id = id;
            s.bus_id = bus.bus_id;
            const double a = spec.arrival_std_slots > 0.0 ? arrival(rng) : spec.arrival_mean_slot + bus.arrival_shift_slots;
            const double d = spec.departure_std_slots > 0.0 ? departure(rng) : spec.departure_mean_slot;
            const double e = energy(rng);
            s.t_start = std::clamp(static_cast<int>(std::lround(a)), spec.arrival_min_slot, spec.arrival_max_slot);
            s.t_end = std::clamp(static_cast<int>(std::lround(d)), s.t_start + spec.min_window_slots, spec.slots);
            s.p_max_kw = spec.p_max_kw * scale;
            s.d_max_kw = spec.d_max_kw * scale;
            s.energy_kwh = e * scale;
            if (clamp_to_feasible(s, spec.slot_hours)) {
                scenario.flags.push_back({s.ev_id, "generated energy clamped to the feasible interval", -1});
            }
            scenario.sessions.push_back(std::move(s));
        }
    }
    scenario.normalize();
    for (const auto& b : spec.buses) scenario.per_bus_counts.try_emplace(b.bus_id, 0);
    return scenario;
}

std::vector<double> uncoordinated_profile(const EvSession& session, int slots, double slot_hours) {
    if (session.energy_kwh < 0.0) {
        throw ValidationError("session " + session.ev_id + ": uncoordinated baseline undefined for negative energy");
    }
    validate_session(session, slots, slot_hours);
    std::vector<double> p(static_cast<std::size_t>(slots), 0.0);
    if (session.energy_kwh == 0.0) return p;

    const double slot_energy = session.p_max_kw * slot_hours;
    const double ratio = session.energy_kwh / slot_energy;
    // Whole slots at full rate; a ratio within rounding of an integer counts
    // as that integer so no spurious sliver slot appears.
    auto full = static_cast<int>(std::floor(ratio + 1e-9));
    full = std::min(full, session.window());
    double remainder = session.energy_kwh - full * slot_energy;
    if (std::abs(remainder) <= 1e-9 * session.energy_kwh) remainder = 0.0;

    for (int k = 0; k < full; ++k) p[static_cast<std::size_t>(session.t_start + k)] = session.p_max_kw;
    if (remainder > 0.0 && session.t_start + full < session.t_end) {
        p[static_cast<std::size_t>(session.t_start + full)] = remainder / slot_hours;
    }
    return p;
}

std::vector<EvSession> read_sessions(std::istream& in, const std::string& source) {
    const auto table = csv::Table::parse(in, source);
    const auto c_id = table.column("ev_id");
    const auto c_bus = table.column("bus_id");
    const auto c_start = table.column("t_start");
    const auto c_end = table.column("t_end");
    const auto c_energy = table.column("energy_kwh");
    const auto c_p = table.column("p_max_kw");
    const auto c_d = table.column("d_max_kw");
    std::vector<EvSession> out;
    for (const auto& row : table.rows()) {
        EvSession s;
        s.ev_id = table.field(row, c_id);
        if (s.ev_id.empty()) throw ParseError(table.where(row), "empty ev_id");
        s.bus_id = table.integer(row, c_bus);
        s.t_start = table.integer(row, c_start);
        s.t_end = table.integer(row, c_end);
        s.energy_kwh = table.number(row, c_energy);
        s.p_max_kw = table.number(row, c_p);
        s.d_max_kw = table.number(row, c_d);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<EvSession> read_sessions_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open sessions file");
    return read_sessions(in, path.string());
}

std::string write_sessions(const std::vector<EvSession>& sessions) {
    std::ostringstream os;
    os << "ev_id,bus_id,t_start,t_end,energy_kwh,p_max_kw,d_max_kw\n";
    for (const auto& s : sessions) {
        os << s.ev_id << ',' << s.bus_id << ',' << s.t_start << ',' << s.t_end << ','
           << csv::format_double(s.energy_kwh) << ',' << csv::format_double(s.p_max_kw) << ','
           << csv::format_double(s.d_max_kw) << '\n';
    }
    return os.str();
}

std::vector<HistoricalRecord> read_history(std::istream& in, const std::string& source) {
    const auto table = csv::Table::parse(in, source);
    const auto c_id = table.column("ev_id");
    const auto c_date = table.column("date");
    const auto c_start = table.column("start_slot");
    const auto c_end = table.column("end_slot");
    const auto c_energy = table.column("energy_kwh");
    std::vector<HistoricalRecord> out;
    for (const auto& row : table.rows()) {
        HistoricalRecord r;
        r.ev_id = table.field(row, c_id);
        r.date = table.field(row, c_date);
        r.start_slot = table.integer(row, c_start);
        r.end_slot = table.integer(row, c_end);
        r.energy_kwh = table.number(row, c_energy);
        if (r.ev_id.empty()) throw ParseError(table.where(row), "empty ev_id");
        if (!(r.start_slot < r.end_slot)) throw ParseError(table.where(row), "start_slot must be < end_slot");
        if (r.energy_kwh < 0.0) throw ParseError(table.where(row), "energy_kwh must be >= 0");
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<HistoricalRecord> read_history_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open history file");
    return read_history(in, path.string());
}

}  // namespace evgrid::fleet
