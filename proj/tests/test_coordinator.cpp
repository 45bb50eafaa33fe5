#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "evgrid/coordinator.hpp"
#include "evgrid/error.hpp"
#include "support.hpp"

using namespace evgrid;
using coordinator::EventKind;
using coordinator::PredictionEvent;
using scheduler::ChargingProfile;
using scheduler::StationProblem;

namespace {

fleet::FleetScenario desk_fleet(int per_bus = 150) {
    fleet::FleetSpec spec;
    spec.buses = {{5, per_bus, 0}, {7, per_bus, 1}, {9, per_bus, -1}};
    spec.vehicles_per_session = 100;
    return fleet::generate_fleet(20240601, spec);
}

metrics::BaseLoadProfile desk_base() { return metrics::read_base_load_file(testing::data_path("base_load_desk.csv")); }

std::vector<StationProblem> problems_on(const fleet::FleetScenario& f, int bus) {
    std::vector<StationProblem> out;
    for (const auto& s : f.sessions_on_bus(bus)) out.push_back(scheduler::make_station_problem(s, 96));
    return out;
}

bool same_bits(const ChargingProfile& a, const ChargingProfile& b) {
    return a.values.size() == b.values.size() &&
           std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) == 0;
}

PredictionEvent add_event(int slot, const std::string& id, int bus, int start, int end, double energy) {
    fleet::EvSession s;
    s.ev_id = id;
    s.bus_id = bus;
    s.t_start = start;
    s.t_end = end;
    s.energy_kwh = energy;
    s.p_max_kw = 660;
    s.d_max_kw = -660;
    return {slot, EventKind::AddSession, id, s, {}};
}

}  // namespace

TEST_CASE("roundtrip with no stations is a broadcast then converged") {
    coordinator::LoopbackTransport t({}, {});
    const std::vector<scheduler::ControlSignal> b{{std::vector<double>(96, 1.0), 1}};
    const auto log = coordinator::transport_roundtrip(t, b);
    REQUIRE(log.messages.size() == 2);
    CHECK(std::holds_alternative<coordinator::Broadcast>(log.messages[0]));
    CHECK(std::holds_alternative<coordinator::Converged>(log.messages[1]));
}

TEST_CASE("a silent station aborts the round with its id") {
    const auto f = desk_fleet(1);
    std::vector<StationProblem> problems;
    for (const auto& s : f.sessions) problems.push_back(scheduler::make_station_problem(s, 96));
    REQUIRE(problems.size() == 3);
    coordinator::LoopbackTransport t(problems, {});
    t.set_silent(problems[1].ev_id);
    try {
        coordinator::gather(t, {{std::vector<double>(96, 1.0), 1}});
        FAIL("expected ProtocolError");
    } catch (const ProtocolError& e) {
        REQUIRE(e.silent_stations().size() == 1);
        CHECK(e.silent_stations()[0] == problems[1].ev_id);
        CHECK(std::string(e.what()).find(problems[1].ev_id) != std::string::npos);
    }
    t.set_silent(problems[1].ev_id, false);
    CHECK(coordinator::gather(t, {{std::vector<double>(96, 1.0), 1}}).size() == 3);
}

TEST_CASE("every broadcast is answered by one update per station before the next") {
    const auto f = desk_fleet(4);
    const auto problems = problems_on(f, 5);
    coordinator::LoopbackTransport t(problems, {});
    const std::vector<scheduler::ControlSignal> b{{std::vector<double>(96, 0.3), 1}, {std::vector<double>(96, 0.4), 2}};
    const auto log = coordinator::transport_roundtrip(t, b);
    REQUIRE(log.messages.size() == 1 + 4 + 1 + 4 + 1);
    int current = 0;
    for (const auto& m : log.messages) {
        if (const auto* x = std::get_if<coordinator::Broadcast>(&m)) current = x->signal.iteration;
        if (const auto* u = std::get_if<coordinator::ProfileUpdate>(&m)) CHECK(u->iteration == current);
    }
    const auto csv = log.to_csv();
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);
    CHECK(csv.find("converged,2,") != std::string::npos);
}

TEST_CASE("loopback coordination equals the in-process sequential path bit for bit") {
    const auto f = desk_fleet();
    const auto base = desk_base();
    const auto problems = problems_on(f, 5);
    REQUIRE(problems.size() == 150);
    const scheduler::SchedulerConfig cfg;
    const auto local = scheduler::run_until_converged(cfg, base.bus(5), problems);

    coordinator::LoopbackTransport t(problems, cfg);
    coordinator::DeliveryLog log;
    const auto remote = scheduler::run_until_converged(cfg, base.bus(5), problems, std::nullopt,
                                                       coordinator::transport_exchange(t, &log));
    REQUIRE(local.profiles.size() == remote.profiles.size());
    for (std::size_t i = 0; i < local.profiles.size(); ++i) CHECK(same_bits(local.profiles[i], remote.profiles[i]));
    CHECK(scheduler::aggregate_mw(local.profiles, 96) == scheduler::aggregate_mw(remote.profiles, 96));
    CHECK(local.trace.iterations == remote.trace.iterations);

    // The coordinator's aggregate is the sum of the latest update per station.
    std::map<std::string, ChargingProfile> latest;
    for (const auto& m : log.messages) {
        if (const auto* u = std::get_if<coordinator::ProfileUpdate>(&m)) latest[u->ev_id] = u->profile;
    }
    std::vector<ChargingProfile> ordered;
    for (const auto& p : problems) ordered.push_back(latest.at(p.ev_id));
    CHECK(scheduler::aggregate_mw(ordered, 96) == scheduler::aggregate_mw(remote.profiles, 96));
}

TEST_CASE("a single horizon step is the one-shot run") {
    const auto f = desk_fleet(40);
    const auto base = desk_base();
    const scheduler::SchedulerConfig cfg;
    const auto h = coordinator::run_receding_horizon(f, base, cfg, {1, 0});
    const auto committed = h.committed();
    for (int bus : {5, 7, 9}) {
        const auto one = scheduler::run_until_converged(cfg, base.bus(bus), problems_on(f, bus));
        std::size_t k = 0;
        for (std::size_t i = 0; i < f.sessions.size(); ++i) {
            if (f.sessions[i].bus_id != bus) continue;
            CHECK(same_bits(committed[i], one.profiles[k++]));
        }
    }
}

TEST_CASE("hourly steps without events reproduce the one-shot schedule") {
    const auto f = desk_fleet();
    const auto base = desk_base();
    const scheduler::SchedulerConfig cfg;
    const auto h = coordinator::run_receding_horizon(f, base, cfg, {24, 0});
    CHECK(h.steps.size() == 72);
    const auto committed = h.committed();
    double worst = 0.0;
    for (int bus : {5, 7, 9}) {
        const auto one = scheduler::run_until_converged(cfg, base.bus(bus), problems_on(f, bus));
        std::size_t k = 0;
        for (std::size_t i = 0; i < f.sessions.size(); ++i) {
            if (f.sessions[i].bus_id != bus) continue;
            for (std::size_t t = 0; t < 96; ++t) {
                worst = std::max(worst, std::abs(committed[i].values[t] - one.profiles[k].values[t]));
            }
            ++k;
        }
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("events leave the committed history untouched and are served afterwards") {
    const auto f = desk_fleet(60);
    const auto base = desk_base();
    const scheduler::SchedulerConfig cfg;
    const auto plain = coordinator::run_receding_horizon(f, base, cfg, {24, 0});
    std::vector<PredictionEvent> events{add_event(25, "late-1", 5, 28, 84, 700),
                                        add_event(25, "late-2", 9, 30, 80, 650),
                                        {40, EventKind::UpdateEnergy, f.sessions[3].ev_id, {}, 820.0}};
    const auto with = coordinator::run_receding_horizon(f, base, cfg, {24, 0}, events);

    const auto a = plain.committed();
    const auto sessions = with.sessions();
    const auto b = with.committed();
    REQUIRE(sessions.size() == f.sessions.size() + 2);
    std::size_t j = 0;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        if (sessions[i].ev_id.rfind("late-", 0) == 0) {
            for (int t = 0; t < 28; ++t) CHECK(b[i].values[static_cast<std::size_t>(t)] == 0.0);
            continue;
        }
        // Boundary 28 is the first step start at or after slot 25.
        CHECK(std::memcmp(a[j].values.data(), b[i].values.data(), 28 * sizeof(double)) == 0);
        ++j;
    }
    bool event_step = false;
    for (const auto& s : with.steps) event_step = event_step || (s.events_applied && s.first_slot == 28);
    CHECK(event_step);
}

TEST_CASE("energy accounting closes at the end of the horizon") {
    const auto f = desk_fleet(50);
    const auto base = desk_base();
    std::vector<PredictionEvent> events{add_event(25, "late-1", 7, 20, 70, 5000),
                                        {40, EventKind::UpdateEnergy, f.sessions[0].ev_id, {}, 1e6},
                                        {50, EventKind::RemoveSession, f.sessions[1].ev_id, {}, {}}};
    const auto h = coordinator::run_receding_horizon(f, base, {}, {24, 0}, events);
    std::set<std::string> flagged;
    for (const auto& fl : h.flags) flagged.insert(fl.ev_id);
    CHECK(flagged.contains("late-1"));
    CHECK(flagged.contains(f.sessions[0].ev_id));
    CHECK(flagged.contains(f.sessions[1].ev_id));

    for (const auto& r : h.regions) {
        for (std::size_t i = 0; i < r.sessions.size(); ++i) {
            const auto& s = r.sessions[i];
            CHECK_MESSAGE(std::abs(r.delivered_kwh[i] - s.energy_kwh) <= 1e-6, s.ev_id);
            for (std::size_t t = 0; t < 96; ++t) {
                const double v = r.committed[i].values[t];
                const int slot = static_cast<int>(t);
                if (slot < s.t_start || slot >= s.t_end) CHECK(v == 0.0);
                CHECK(v <= s.p_max_kw);
                CHECK(v >= s.d_max_kw);
            }
            if (r.removed[i]) {
                for (std::size_t t = 56; t < 96; ++t) CHECK(r.committed[i].values[t] == 0.0);
            }
        }
    }
    for (const auto& s : h.sessions()) {
        if (s.ev_id == "late-1") CHECK(s.t_start == 28);
    }
}

TEST_CASE("bad events are rejected") {
    const auto f = desk_fleet(2);
    const auto base = desk_base();
    const std::vector<PredictionEvent> unknown{{30, EventKind::UpdateEnergy, "nobody", {}, 5.0}};
    CHECK_THROWS_AS(coordinator::run_receding_horizon(f, base, {}, {24, 0}, unknown), ValidationError);
    const std::vector<PredictionEvent> dup{add_event(30, f.sessions[0].ev_id, 5, 40, 60, 10)};
    CHECK_THROWS_AS(coordinator::run_receding_horizon(f, base, {}, {24, 0}, dup), ValidationError);
    const std::vector<PredictionEvent> late{add_event(200, "x", 5, 40, 60, 10)};
    CHECK_THROWS_AS(coordinator::run_receding_horizon(f, base, {}, {24, 0}, late), ValidationError);
    CHECK_THROWS_AS(coordinator::run_receding_horizon(f, base, {}, {25, 4}), ValidationError);
}

TEST_CASE("events file round-trips") {
    const auto events = coordinator::read_events_file(testing::data_path("events_desk.csv"));
    REQUIRE(events.size() >= 4);
    std::istringstream in(coordinator::write_events(events));
    const auto back = coordinator::read_events(in);
    REQUIRE(back.size() == events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(back[i].slot == events[i].slot);
        CHECK(back[i].kind == events[i].kind);
        CHECK(back[i].ev_id == events[i].ev_id);
        CHECK(back[i].session == events[i].session);
        CHECK(back[i].energy_kwh == events[i].energy_kwh);
    }
    std::istringstream bad("slot,kind,ev_id,bus_id,t_start,t_end,energy_kwh,p_max_kw,d_max_kw\n3,teleport,a,,,,,,\n");
    CHECK_THROWS_WITH_AS(coordinator::read_events(bad, "e.csv"), doctest::Contains("e.csv:2"), ParseError);
}
