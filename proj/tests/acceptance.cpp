// Acceptance run over the shipped desk scenario. Prints one PASS/FAIL line
// per criterion and exits nonzero if any criterion fails.
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "evgrid/cli.hpp"
#include "evgrid/config.hpp"
#include "evgrid/coordinator.hpp"
#include "evgrid/powerflow.hpp"
#include "evgrid/schedule_io.hpp"
#include "oracles/finite_difference.hpp"
#include "oracles/gauss_seidel.hpp"
#include "oracles/qp_enumeration.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace evgrid;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
    std::printf("%s %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// The desk scenario assembled through the library, as the simulate command does.
struct Desk {
    cli::RunConfig config;
    metrics::BaseLoadProfile base;
    fleet::FleetScenario fleet;
    std::vector<coordinator::PredictionEvent> events;
};

Desk load_desk() {
    Desk d;
    d.config = cli::load_run_config(testing::data_path("desk_scenario.json"));
    d.config.validate();
    d.base = metrics::read_base_load_file(d.config.base_load);
    auto spec = *d.config.fleet;
    spec.slots = d.config.scheduler.slots;
    spec.slot_hours = d.config.scheduler.slot_hours;
    d.fleet = fleet::generate_fleet(d.config.seed, spec);
    d.events = coordinator::read_events_file(d.config.events);
    return d;
}

void criterion_1() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    bool all_solved = true;
    scheduler::SchedulerConfig cfg;
    cfg.slots = 8;
    cfg.price_scale = 1.0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> price, previous, lo, hi;
        double lo_e = 0.0, hi_e = 0.0;
        for (int t = 0; t < 8; ++t) {
            const bool inside = u(rng) < 0.75;
            lo.push_back(inside ? -6.6 * u(rng) : 0.0);
            hi.push_back(inside ? 6.6 * u(rng) : 0.0);
            previous.push_back(lo.back() + (hi.back() - lo.back()) * u(rng));
            price.push_back(-10.0 + 20.0 * u(rng));
            lo_e += lo.back() * 0.25;
            hi_e += hi.back() * 0.25;
        }
        const double energy = lo_e + (hi_e - lo_e) * u(rng);
        const auto got = scheduler::solve_station_subproblem({price, 1}, {previous}, {"x", lo, hi, energy}, cfg);
        const auto want = oracle::solve_by_enumeration(price, previous, lo, hi, energy, 0.25);
        if (!want) {
            all_solved = false;
            continue;
        }
        for (std::size_t t = 0; t < 8; ++t) worst = std::max(worst, std::abs(got.values[t] - (*want)[t]));
    }
    const double secs = seconds_since(t0);
    report(1, "subproblem oracle equivalence", all_solved && worst <= 1e-6 && secs < 10.0,
           fmt("max deviation %.3g kW over 1000 instances, %.2f s", worst, secs));
}

void criterion_2(const Desk& d, const coordinator::RecedingHorizonResult& h) {
    const double dt = d.config.scheduler.slot_hours;
    double worst_energy = 0.0;
    int bound_violations = 0;
    int window_violations = 0;
    std::size_t checked = 0;
    bool converged = true;
    for (const auto& s : h.steps) converged = converged && s.trace.converged;
    for (const auto& r : h.regions) {
        for (std::size_t i = 0; i < r.sessions.size(); ++i) {
            const auto& s = r.sessions[i];
            const auto& p = r.committed[i].values;
            double e = 0.0;
            for (std::size_t t = 0; t < p.size(); ++t) {
                e += p[t] * dt;
                const int slot = static_cast<int>(t);
                if (slot < s.t_start || slot >= s.t_end) {
                    if (p[t] != 0.0) ++window_violations;
                } else if (p[t] > s.p_max_kw || p[t] < s.d_max_kw) {
                    ++bound_violations;
                }
            }
            worst_energy = std::max(worst_energy, std::abs(e - s.energy_kwh));
            ++checked;
        }
    }
    report(2, "constraint satisfaction",
           converged && worst_energy <= 1e-6 && bound_violations == 0 && window_violations == 0,
           fmt("%zu sessions; max energy error %.3g kWh; %d rate and %d window violations", checked, worst_energy,
               bound_violations, window_violations));
}

void criterion_3() {
    const auto solve = [](const grid::GridCase& g) {
        return powerflow::solve_power_flow(g, grid::build_admittance_matrix(g), {1e-12, 20});
    };
    bool ok = true;

    const auto flat_case = grid::load_grid_case_file(testing::data_path("wscc9_unloaded.case"));
    const auto flat = solve(flat_case);
    double flat_dev = 0.0;
    for (std::size_t i = 0; i < flat_case.size(); ++i) {
        flat_dev = std::max({flat_dev, std::abs(flat.v_mag[i] - 1.0), std::abs(flat.v_angle[i])});
    }
    ok = ok && flat_dev == 0.0;

    const auto two = testing::parse_case(testing::kTwoBus);
    const auto s2 = solve(two);
    const double theta = 0.5 * std::asin(-0.1);
    const double two_dev = std::max(std::abs(s2.v_angle[1] - theta), std::abs(s2.v_mag[1] - std::cos(theta)));
    ok = ok && two_dev <= 1e-8;

    const auto base = testing::wscc9();
    const auto peak = base.with_injections(io::read_snapshot_file(testing::data_path("wscc9_peak_snapshot.csv"), base.s_base()));
    double gs_gap = 0.0;
    for (const auto& g : {base, peak}) {
        const auto nr = solve(g);
        const auto gs = oracle::gauss_seidel(g);
        ok = ok && gs.converged;
        for (std::size_t i = 0; i < g.size(); ++i) {
            gs_gap = std::max(gs_gap, std::abs(std::polar(nr.v_mag[i], nr.v_angle[i]) - gs.voltage[i]));
        }
    }
    ok = ok && gs_gap <= 1e-6;

    const auto layout = powerflow::UnknownLayout::for_case(peak);
    std::vector<double> vm(peak.size(), 1.0), va(peak.size(), 0.0);
    for (std::size_t i = 0; i < peak.size(); ++i) {
        if (peak.buses()[i].kind != grid::BusKind::PQ) vm[i] = peak.buses()[i].v_mag;
    }
    const auto jac = powerflow::build_jacobian(layout, vm, va, grid::build_admittance_matrix(peak));
    const auto fd = oracle::jacobian_by_differences(peak, layout, vm, va);
    double scale = 0.0;
    for (const auto& row : fd) {
        for (double v : row) scale = std::max(scale, std::abs(v));
    }
    double jac_rel = 0.0;
    for (std::size_t r = 0; r < layout.size(); ++r) {
        for (std::size_t c = 0; c < layout.size(); ++c) {
            jac_rel = std::max(jac_rel, std::abs(jac(r, c) - fd[r][c]) / std::max(std::abs(fd[r][c]), 1e-3 * scale));
        }
    }
    ok = ok && jac_rel <= 1e-6;

    const auto& hist = solve(peak).mismatch_history;
    double ratio = 0.0;
    int terminal = 0;
    for (std::size_t k = 0; k + 1 < hist.size(); ++k) {
        if (hist[k] > 1e-1 || hist[k + 1] < 1e-14) continue;
        ratio = std::max(ratio, hist[k + 1] / (hist[k] * hist[k]));
        ++terminal;
    }
    ok = ok && terminal >= 2 && ratio <= 1.0;

    report(3, "power-flow correctness", ok,
           fmt("flat %.1e; two-bus %.1e; NR vs Gauss-Seidel %.1e pu; Jacobian %.1e relative; terminal "
               "h(k+1)/h(k)^2 <= %.3f over %d steps",
               flat_dev, two_dev, gs_gap, jac_rel, ratio, terminal));
}

void criteria_4_to_6(const nlohmann::json& j, double secs) {
    const auto& peak = j["peak"];
    const double shave = peak["shaving_pct"].get<double>();
    report(4, "peak shaving", shave >= 25.0 && shave <= 40.0 && secs < 60.0,
           fmt("system peak %.2f -> %.2f MW, %.2f%% shaving; simulate took %.2f s", peak["before_mw"].get<double>(),
               peak["after_mw"].get<double>(), shave, secs));

    bool all_up = true;
    std::vector<std::pair<double, int>> weakest;
    for (const auto& v : j["bus_voltages"]) {
        if (v["kind"] != "pq") continue;
        all_up = all_up && v["after_pu"].get<double>() > v["before_pu"].get<double>();
        weakest.emplace_back(v["before_pu"].get<double>(), v["bus_id"].get<int>());
    }
    std::sort(weakest.begin(), weakest.end());
    bool lift = weakest.size() >= 2;
    std::string detail;
    for (std::size_t k = 0; k < std::min<std::size_t>(2, weakest.size()); ++k) {
        for (const auto& v : j["bus_voltages"]) {
            if (v["bus_id"] != weakest[k].second) continue;
            const double gain = v["after_pu"].get<double>() - v["before_pu"].get<double>();
            lift = lift && gain >= 0.015;
            detail += fmt("bus %d %.4f -> %.4f pu; ", weakest[k].second, v["before_pu"].get<double>(),
                          v["after_pu"].get<double>());
        }
    }
    report(5, "voltage improvement", all_up && lift, detail + (all_up ? "every PQ bus rises" : "a PQ bus fell"));

    const auto& lc = j["total_line_current"];
    const double cut = lc["reduction_pct"].get<double>();
    double swing_before = 0.0, swing_after = 0.0;
    for (const auto& g : j["generation"]) {
        if (g["kind"] != "swing") continue;
        swing_before = g["p_mw_before"].get<double>();
        swing_after = g["p_mw_after"].get<double>();
    }
    report(6, "line-current reduction",
           cut >= 25.0 && swing_after < swing_before && swing_after >= 80.0 && swing_after <= 160.0,
           fmt("line current %.1f -> %.1f A (%.2f%% lower); swing %.2f -> %.2f MW", lc["before_a"].get<double>(),
               lc["after_a"].get<double>(), cut, swing_before, swing_after));
}

void criterion_7(const coordinator::RecedingHorizonResult& h) {
    int worst_iterations = 0;
    int increases = 0;
    bool converged = true;
    for (const auto& s : h.steps) {
        worst_iterations = std::max(worst_iterations, s.trace.iterations);
        converged = converged && s.trace.converged;
        increases += static_cast<int>(s.trace.objective_increases.size());
        const auto& e = s.trace.entries;
        for (std::size_t k = 1; k < e.size(); ++k) {
            if (e[k].objective > e[k - 1].objective + 1e-12 * std::max(1.0, std::abs(e[k - 1].objective))) ++increases;
        }
    }
    report(7, "convergence behavior", converged && worst_iterations <= 200 && increases == 0,
           fmt("%zu region steps, at most %d iterations per step, %d objective increases", h.steps.size(),
               worst_iterations, increases));
}

void criterion_8(const Desk& d, const coordinator::RecedingHorizonResult& with_events) {
    const auto& cfg = d.config.scheduler;
    const auto plain = coordinator::run_receding_horizon(d.fleet, d.base, cfg, d.config.horizon);
    double one_shot_gap = 0.0;
    for (const auto& r : plain.regions) {
        std::vector<scheduler::StationProblem> problems;
        for (const auto& s : r.sessions) problems.push_back(scheduler::make_station_problem(s, cfg.slots));
        const auto one = scheduler::run_until_converged(cfg, d.base.bus(r.bus_id), problems);
        for (std::size_t i = 0; i < problems.size(); ++i) {
            for (std::size_t t = 0; t < one.profiles[i].values.size(); ++t) {
                one_shot_gap = std::max(one_shot_gap, std::abs(r.committed[i].values[t] - one.profiles[i].values[t]));
            }
        }
    }

    const int per_step = d.config.horizon.step_slots(cfg.slots);
    int first_event = cfg.slots;
    for (const auto& e : d.events) first_event = std::min(first_event, e.slot);
    const int boundary = (first_event + per_step - 1) / per_step * per_step;
    std::map<std::string, const scheduler::ChargingProfile*> before;
    for (const auto& r : plain.regions) {
        for (std::size_t i = 0; i < r.sessions.size(); ++i) before[r.sessions[i].ev_id] = &r.committed[i];
    }
    int mismatched = 0;
    std::size_t compared = 0;
    for (const auto& r : with_events.regions) {
        for (std::size_t i = 0; i < r.sessions.size(); ++i) {
            const auto* ref = before.contains(r.sessions[i].ev_id) ? before.at(r.sessions[i].ev_id) : nullptr;
            const auto& p = r.committed[i].values;
            if (ref == nullptr) {
                for (int t = 0; t < boundary; ++t) mismatched += p[static_cast<std::size_t>(t)] != 0.0;
                continue;
            }
            ++compared;
            mismatched += std::memcmp(ref->values.data(), p.data(), static_cast<std::size_t>(boundary) * sizeof(double)) != 0;
        }
    }
    report(8, "receding-horizon consistency", one_shot_gap <= 1e-9 && mismatched == 0 && compared > 0,
           fmt("stitched vs one-shot %.3g kW; history before slot %d identical for %zu sessions (%d differ)",
               one_shot_gap, boundary, compared, mismatched));
}

void criterion_9(const fs::path& first) {
    const auto root = first.parent_path();
    std::ostringstream out, err;
    const int a = cli::run({"simulate", "-c", testing::data_path("desk_scenario.json").string(), "-o",
                            (root / "second").string()},
                           out, err);
    const int b = cli::run({"simulate", "-c", testing::data_path("desk_scenario.json").string(), "--threads", "4", "-o",
                            (root / "threaded").string()},
                           out, err);
    int files = 0;
    int differ = 0;
    for (const auto& e : fs::directory_iterator(first)) {
        const auto name = e.path().filename();
        const auto text = slurp(e.path());
        ++files;
        differ += text != slurp(root / "second" / name);
        differ += text != slurp(root / "threaded" / name);
    }
    report(9, "determinism", a == 0 && b == 0 && files == 7 && differ == 0,
           fmt("%d output files compared across a repeat and a 4-thread run, %d differ", files, differ));
}

}  // namespace

int main() {
    try {
        criterion_1();

        const auto desk = load_desk();
        const auto horizon = coordinator::run_receding_horizon(desk.fleet, desk.base, desk.config.scheduler,
                                                               desk.config.horizon, desk.events);
        criterion_2(desk, horizon);
        criterion_3();

        const auto dir = testing::scratch_dir("acceptance") / "first";
        std::ostringstream out, err;
        const auto t0 = Clock::now();
        const int status =
            cli::run({"simulate", "-c", testing::data_path("desk_scenario.json").string(), "-o", dir.string()}, out, err);
        const double secs = seconds_since(t0);
        if (status != 0) {
            std::printf("simulate failed: %s", err.str().c_str());
            for (int id : {4, 5, 6}) report(id, "simulate", false, "simulate exited nonzero");
        } else {
            criteria_4_to_6(nlohmann::json::parse(slurp(dir / "report.json")), secs);
        }
        criterion_7(horizon);
        criterion_8(desk, horizon);
        criterion_9(dir);
    } catch (const std::exception& e) {
        std::printf("FAIL acceptance aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
