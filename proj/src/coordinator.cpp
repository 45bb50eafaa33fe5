#include "evgrid/coordinator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "evgrid/csv.hpp"
#include "evgrid/error.hpp"

namespace evgrid::coordinator {

using scheduler::ChargingProfile;
using scheduler::ControlSignal;
using scheduler::StationProblem;

namespace {

void write_values(std::ostream& os, const std::vector<double>& values) {
    for (double v : values) os << ',' << csv::format_double(v);
}

}  // namespace

std::string DeliveryLog::to_csv() const {
    std::ostringstream os;
    os << "kind,iteration,ev_id,values\n";
    for (const auto& m : messages) {
        if (const auto* b = std::get_if<Broadcast>(&m)) {
            os << "broadcast," << b->signal.iteration << ',';
            write_values(os, b->signal.values);
        } else if (const auto* u = std::get_if<ProfileUpdate>(&m)) {
            os << "profile_update," << u->iteration << ',' << u->ev_id;
            write_values(os, u->profile.values);
        } else {
            os << "converged," << std::get<Converged>(m).iteration << ',';
        }
        os << '\n';
    }
    return os.str();
}

LoopbackTransport::LoopbackTransport(std::vector<StationProblem> problems, scheduler::SchedulerConfig config,
                                     std::optional<std::vector<ChargingProfile>> initial)
    : problems_(std::move(problems)), config_(config) {
    config_.validate();
    if (initial) {
        if (initial->size() != problems_.size()) throw ValidationError("loopback: one initial profile per station");
        profiles_ = std::move(*initial);
    } else {
        profiles_.assign(problems_.size(),
                         ChargingProfile{std::vector<double>(static_cast<std::size_t>(config_.slots), 0.0)});
    }
}

std::vector<std::string> LoopbackTransport::station_ids() const {
    std::vector<std::string> ids;
    ids.reserve(problems_.size());
    for (const auto& p : problems_) ids.push_back(p.ev_id);
    return ids;
}

std::vector<ProfileUpdate> LoopbackTransport::deliver(const Broadcast& broadcast) {
    std::vector<ProfileUpdate> updates;
    for (std::size_t i = 0; i < problems_.size(); ++i) {
        if (silent_.contains(problems_[i].ev_id)) continue;
        profiles_[i] = scheduler::solve_station_subproblem(broadcast.signal, profiles_[i], problems_[i], config_);
        updates.push_back({problems_[i].ev_id, profiles_[i], broadcast.signal.iteration});
    }
    return updates;
}

void LoopbackTransport::set_silent(const std::string& ev_id, bool silent) {
    if (silent) {
        silent_.insert(ev_id);
    } else {
        silent_.erase(ev_id);
    }
}

std::vector<ChargingProfile> gather(Transport& transport, const Broadcast& broadcast, DeliveryLog* log) {
    const auto ids = transport.station_ids();
    std::map<std::string, std::size_t> slot_of;
    for (std::size_t i = 0; i < ids.size(); ++i) slot_of.emplace(ids[i], i);

    auto updates = transport.deliver(broadcast);
    std::vector<int> answers(ids.size(), 0);
    std::vector<ChargingProfile> out(ids.size());
    for (auto& u : updates) {
        auto it = slot_of.find(u.ev_id);
        if (it == slot_of.end()) throw ProtocolError("profile update from unknown station " + u.ev_id, {});
        if (u.iteration != broadcast.signal.iteration) {
            throw ProtocolError("station " + u.ev_id + " answered iteration " + std::to_string(u.iteration) +
                                    " during broadcast " + std::to_string(broadcast.signal.iteration),
                                {});
        }
        ++answers[it->second];
        out[it->second] = u.profile;
    }
    std::vector<std::string> silent;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (answers[i] != 1) silent.push_back(ids[i]);
    }
    if (!silent.empty()) {
        std::string names;
        for (const auto& s : silent) names += (names.empty() ? "" : ", ") + s;
        throw ProtocolError("broadcast " + std::to_string(broadcast.signal.iteration) +
                                " did not get exactly one update from: " + names,
                            std::move(silent));
    }
    if (log) {
        log->messages.emplace_back(broadcast);
        // Logged in station order, whatever order the updates arrived in.
        for (std::size_t i = 0; i < ids.size(); ++i) {
            log->messages.emplace_back(ProfileUpdate{ids[i], out[i], broadcast.signal.iteration});
        }
    }
    return out;
}

DeliveryLog transport_roundtrip(Transport& transport, std::span<const ControlSignal> broadcasts) {
    DeliveryLog log;
    int last = 0;
    for (const auto& signal : broadcasts) {
        if (!log.messages.empty() && signal.iteration <= last) {
            throw ProtocolError("broadcast iterations must increase within a round trip", {});
        }
        gather(transport, Broadcast{signal}, &log);
        last = signal.iteration;
    }
    log.messages.emplace_back(Converged{last});
    return log;
}

scheduler::Exchange transport_exchange(Transport& transport, DeliveryLog* log) {
    return [&transport, log](const ControlSignal& broadcast, std::span<const ChargingProfile>) {
        return gather(transport, Broadcast{broadcast}, log);
    };
}

namespace {

std::string kind_name(EventKind k) {
    switch (k) {
        case EventKind::AddSession: return "add_session";
        case EventKind::UpdateEnergy: return "update_energy";
        case EventKind::RemoveSession: return "remove_session";
    }
    return "?";
}

}  // namespace

std::vector<PredictionEvent> read_events(std::istream& in, const std::string& source) {
    const auto table = csv::Table::parse(in, source);
    const auto c_slot = table.column("slot");
    const auto c_kind = table.column("kind");
    const auto c_id = table.column("ev_id");
    const auto c_bus = table.column("bus_id");
    const auto c_start = table.column("t_start");
    const auto c_end = table.column("t_end");
    const auto c_energy = table.column("energy_kwh");
    const auto c_p = table.column("p_max_kw");
    const auto c_d = table.column("d_max_kw");

    std::vector<PredictionEvent> out;
    for (const auto& row : table.rows()) {
        PredictionEvent e;
        e.slot = table.integer(row, c_slot);
        if (e.slot < 0) throw ParseError(table.where(row), "slot must be >= 0");
        e.ev_id = table.field(row, c_id);
        if (e.ev_id.empty()) throw ParseError(table.where(row), "empty ev_id");
        const auto& kind = table.field(row, c_kind);
        const auto need = [&](std::size_t col, const char* name) {
            auto v = table.optional_number(row, col);
            if (!v) throw ParseError(table.where(row), std::string(name) + " is required for " + kind);
            return *v;
        };
        if (kind == "add_session") {
            e.kind = EventKind::AddSession;
            fleet::EvSession s;
            s.ev_id = e.ev_id;
            s.bus_id = static_cast<int>(need(c_bus, "bus_id"));
            s.t_start = static_cast<int>(need(c_start, "t_start"));
            s.t_end = static_cast<int>(need(c_end, "t_end"));
            s.energy_kwh = need(c_energy, "energy_kwh");
            if (auto p = table.optional_number(row, c_p)) s.p_max_kw = *p;
            if (auto d = table.optional_number(row, c_d)) s.d_max_kw = *d;
            e.session = s;
        } else if (kind == "update_energy") {
            e.kind = EventKind::UpdateEnergy;
            e.energy_kwh = need(c_energy, "energy_kwh");
        } else if (kind == "remove_session") {
            e.kind = EventKind::RemoveSession;
        } else {
            throw ParseError(table.where(row), "unknown event kind '" + kind + "'");
        }
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<PredictionEvent> read_events_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open events file");
    return read_events(in, path.string());
}

std::string write_events(std::span<const PredictionEvent> events) {
    std::ostringstream os;
    os << "slot,kind,ev_id,bus_id,t_start,t_end,energy_kwh,p_max_kw,d_max_kw\n";
    for (const auto& e : events) {
        os << e.slot << ',' << kind_name(e.kind) << ',' << e.ev_id << ',';
        if (e.session) {
            const auto& s = *e.session;
            os << s.bus_id << ',' << s.t_start << ',' << s.t_end << ',' << csv::format_double(s.energy_kwh) << ','
               << csv::format_double(s.p_max_kw) << ',' << csv::format_double(s.d_max_kw);
        } else if (e.energy_kwh) {
            os << ",,," << csv::format_double(*e.energy_kwh) << ",,";
        } else {
            os << ",,,,,";
        }
        os << '\n';
    }
    return os.str();
}

int HorizonConfig::step_slots(int slots) const {
    if (steps < 1) throw ValidationError("horizon: steps must be >= 1");
    const int per = slots_per_step > 0 ? slots_per_step : slots / steps;
    if (per < 1) throw ValidationError("horizon: fewer slots than steps");
    if (per * steps > slots) throw ValidationError("horizon: steps * slots_per_step exceeds the slot count");
    return per;
}

std::vector<fleet::EvSession> RecedingHorizonResult::sessions() const {
    std::vector<fleet::EvSession> out;
    for (const auto& r : regions) out.insert(out.end(), r.sessions.begin(), r.sessions.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.ev_id < b.ev_id; });
    return out;
}

std::vector<ChargingProfile> RecedingHorizonResult::committed() const {
    std::vector<std::pair<std::string, const ChargingProfile*>> rows;
    for (const auto& r : regions) {
        for (std::size_t i = 0; i < r.sessions.size(); ++i) rows.emplace_back(r.sessions[i].ev_id, &r.committed[i]);
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ChargingProfile> out;
    out.reserve(rows.size());
    for (const auto& [id, p] : rows) out.push_back(*p);
    return out;
}

namespace {

struct Region {
    HorizonState state;
    std::vector<ChargingProfile> plan;  // latest solution, aligned with state.sessions
    std::optional<scheduler::ResumeState> resume;
    bool dirty = true;
};

double delivered(const ChargingProfile& committed, int upto, double dt) {
    double e = 0.0;
    for (int t = 0; t < upto; ++t) e += committed.values[static_cast<std::size_t>(t)] * dt;
    return e;
}

// Energy reachable for a session whose slots before `boundary` are fixed.
std::pair<double, double> reachable(const fleet::EvSession& s, double delivered_kwh, int boundary, double dt) {
    const int remaining = std::max(0, s.t_end - std::max(s.t_start, boundary));
    return {delivered_kwh + s.d_max_kw * dt * remaining, delivered_kwh + s.p_max_kw * dt * remaining};
}

StationProblem build_problem(const fleet::EvSession& s, const ChargingProfile& committed, bool removed,
                             int boundary, int slots) {
    auto p = scheduler::make_station_problem(s, slots);
    for (int t = 0; t < slots; ++t) {
        const auto k = static_cast<std::size_t>(t);
        if (t < boundary) {
            p.lower_kw[k] = p.upper_kw[k] = committed.values[k];
        } else if (removed) {
            p.lower_kw[k] = p.upper_kw[k] = 0.0;
        }
    }
    return p;
}

Region* find_region(std::map<int, Region>& regions, const std::string& ev_id, std::size_t& index) {
    for (auto& [bus, r] : regions) {
        for (std::size_t i = 0; i < r.state.sessions.size(); ++i) {
            if (r.state.sessions[i].ev_id == ev_id) {
                index = i;
                return &r;
            }
        }
    }
    return nullptr;
}

}  // namespace

RecedingHorizonResult run_receding_horizon(const fleet::FleetScenario& scenario, const metrics::BaseLoadProfile& base,
                                           const scheduler::SchedulerConfig& config, const HorizonConfig& horizon,
                                           std::span<const PredictionEvent> events) {
    config.validate();
    const int slots = config.slots;
    const double dt = config.slot_hours;
    if (scenario.slots != slots || base.slots != slots) {
        throw ValidationError("scenario, base load and scheduler must share one slot count");
    }
    const int per_step = horizon.step_slots(slots);
    const auto zero = ChargingProfile{std::vector<double>(static_cast<std::size_t>(slots), 0.0)};

    RecedingHorizonResult result;
    result.flags = scenario.flags;
    std::map<int, Region> regions;
    const auto region_for = [&](int bus) -> Region& {
        auto [it, inserted] = regions.try_emplace(bus);
        if (inserted) {
            base.bus(bus);
            it->second.state.bus_id = bus;
        }
        return it->second;
    };
    for (const auto& s : scenario.sessions) {
        fleet::validate_session(s, slots, dt);
        auto& r = region_for(s.bus_id);
        r.state.sessions.push_back(s);
        r.state.committed.push_back(zero);
        r.state.delivered_kwh.push_back(0.0);
        r.state.removed.push_back(false);
        r.plan.push_back(zero);
    }

    std::vector<std::size_t> order(events.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return events[a].slot < events[b].slot; });
    for (const auto& e : events) {
        if (e.slot >= slots) throw ValidationError("event for " + e.ev_id + " lies outside the horizon");
    }
    std::size_t next_event = 0;

    for (int step = 0; step < horizon.steps; ++step) {
        const int boundary = step * per_step;
        const int commit_end = step + 1 == horizon.steps ? slots : boundary + per_step;

        for (auto& [bus, r] : regions) {
            for (std::size_t i = 0; i < r.state.sessions.size(); ++i) {
                r.state.delivered_kwh[i] = delivered(r.state.committed[i], boundary, dt);
            }
        }

        while (next_event < order.size() && events[order[next_event]].slot <= boundary) {
            const auto& e = events[order[next_event++]];
            std::size_t idx = 0;
            Region* owner = find_region(regions, e.ev_id, idx);
            switch (e.kind) {
                case EventKind::AddSession: {
                    if (owner) throw ValidationError("event adds " + e.ev_id + " which already exists");
                    if (!e.session) throw ValidationError("add_session event for " + e.ev_id + " has no payload");
                    auto s = *e.session;
                    s.ev_id = e.ev_id;
                    if (s.t_end <= boundary) {
                        result.flags.push_back({s.ev_id, "arrival window already elapsed; ignored", e.slot});
                        break;
                    }
                    if (s.t_start < boundary) {
                        s.t_start = boundary;
                        result.flags.push_back({s.ev_id, "window clipped to the current step boundary", e.slot});
                    }
                    if (!(s.t_start < s.t_end && s.t_end <= slots)) {
                        throw ValidationError("event for " + s.ev_id + " has an invalid window");
                    }
                    if (fleet::clamp_to_feasible(s, dt)) {
                        result.flags.push_back({s.ev_id, "energy clamped to the feasible interval", e.slot});
                    }
                    fleet::validate_session(s, slots, dt);
                    auto& r = region_for(s.bus_id);
                    // Keep ev_id order inside the region.
                    auto pos = std::lower_bound(r.state.sessions.begin(), r.state.sessions.end(), s.ev_id,
                                                [](const auto& a, const std::string& id) { return a.ev_id < id; });
                    const auto at = static_cast<std::size_t>(pos - r.state.sessions.begin());
                    r.state.sessions.insert(pos, s);
                    r.state.committed.insert(r.state.committed.begin() + static_cast<std::ptrdiff_t>(at), zero);
                    r.state.delivered_kwh.insert(r.state.delivered_kwh.begin() + static_cast<std::ptrdiff_t>(at), 0.0);
                    r.state.removed.insert(r.state.removed.begin() + static_cast<std::ptrdiff_t>(at), false);
                    r.plan.insert(r.plan.begin() + static_cast<std::ptrdiff_t>(at), zero);
                    r.dirty = true;
                    break;
                }
                case EventKind::UpdateEnergy: {
                    if (!owner) throw ValidationError("event updates unknown EV " + e.ev_id);
                    if (!e.energy_kwh) throw ValidationError("update_energy event for " + e.ev_id + " has no energy");
                    auto& s = owner->state.sessions[idx];
                    if (owner->state.removed[idx]) {
                        result.flags.push_back({s.ev_id, "update for a removed session ignored", e.slot});
                        break;
                    }
                    const auto [lo, hi] = reachable(s, owner->state.delivered_kwh[idx], boundary, dt);
                    const double target = std::clamp(*e.energy_kwh, lo, hi);
                    if (target != *e.energy_kwh) {
                        result.flags.push_back({s.ev_id, "updated energy clamped to what the remaining window allows",
                                                e.slot});
                    }
                    s.energy_kwh = target;
                    owner->dirty = true;
                    break;
                }
                case EventKind::RemoveSession: {
                    if (!owner) throw ValidationError("event removes unknown EV " + e.ev_id);
                    auto& s = owner->state.sessions[idx];
                    owner->state.removed[idx] = true;
                    s.energy_kwh = owner->state.delivered_kwh[idx];
                    result.flags.push_back({s.ev_id, "session removed; demand set to energy already delivered",
                                            e.slot});
                    owner->dirty = true;
                    break;
                }
            }
        }

        for (auto& [bus, r] : regions) {
            auto& st = r.state;
            st.tau = step + 1;
            std::vector<StationProblem> problems;
            problems.reserve(st.sessions.size());
            for (std::size_t i = 0; i < st.sessions.size(); ++i) {
                problems.push_back(build_problem(st.sessions[i], st.committed[i], st.removed[i], boundary, slots));
            }
            scheduler::ScheduleResult solved;
            const bool events_applied = r.dirty;
            if (r.dirty || !r.resume) {
                std::optional<std::vector<ChargingProfile>> warm;
                if (step > 0) warm = r.plan;
                solved = scheduler::run_until_converged(config, base.bus(bus), problems, std::move(warm));
            } else {
                solved = scheduler::resume_until_converged(config, base.bus(bus), problems, *r.resume);
            }
            if (!solved.trace.converged) {
                result.flags.push_back({"bus " + std::to_string(bus),
                                        "step " + std::to_string(step + 1) + " did not converge", boundary});
            }
            r.plan = solved.profiles;
            r.resume = solved.resume;
            r.dirty = false;
            for (std::size_t i = 0; i < st.sessions.size(); ++i) {
                for (int t = boundary; t < commit_end; ++t) {
                    const auto k = static_cast<std::size_t>(t);
                    st.committed[i].values[k] = r.plan[i].values[k];
                }
            }
            result.steps.push_back({bus, step + 1, boundary, events_applied && step > 0, std::move(solved.trace)});
        }
    }

    for (auto& [bus, r] : regions) {
        for (std::size_t i = 0; i < r.state.sessions.size(); ++i) {
            r.state.delivered_kwh[i] = delivered(r.state.committed[i], slots, dt);
        }
        result.regions.push_back(std::move(r.state));
    }
    for (; next_event < order.size(); ++next_event) {
        const auto& e = events[order[next_event]];
        result.flags.push_back({e.ev_id, "event after the last step boundary; not applied", e.slot});
    }
    return result;
}

}  // namespace evgrid::coordinator
