#include "evgrid/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "evgrid/config.hpp"
#include "evgrid/coordinator.hpp"
#include "evgrid/csv.hpp"
#include "evgrid/error.hpp"
#include "evgrid/grid_model.hpp"
#include "evgrid/kernels.hpp"
#include "evgrid/metrics.hpp"
#include "evgrid/powerflow.hpp"
#include "evgrid/schedule_io.hpp"

namespace evgrid::cli {

namespace {

namespace fs = std::filesystem;

// Flags shared by the subcommands that read a run configuration. Anything
// set here wins over the file.
struct Overrides {
    std::string config;
    std::string grid_case;
    std::string base_load;
    std::string sessions;
    std::string events;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<double> lambda;
    std::optional<double> epsilon;
    std::optional<int> max_iterations;
    std::optional<int> steps;
    bool no_events = false;

    void attach(CLI::App& app, bool with_scheduler) {
        app.add_option("-c,--config", config, "JSON run configuration");
        app.add_option("--case", grid_case, "Grid case file");
        app.add_option("--base-load", base_load, "Base load file (slot,bus_id,mw)");
        app.add_option("-o,--output-dir", output_dir, "Directory for output files");
        if (!with_scheduler) return;
        app.add_option("--sessions", sessions, "Sessions file; replaces a fleet spec");
        app.add_option("--events", events, "Scripted prediction updates");
        app.add_flag("--no-events", no_events, "Ignore any events file in the configuration");
        app.add_option("--seed", seed, "Seed for fleet generation");
        app.add_option("--threads", threads, "Worker threads for station solves");
        app.add_option("--lambda", lambda, "Control-signal tuning parameter");
        app.add_option("--epsilon", epsilon, "Convergence threshold on the control signal");
        app.add_option("--max-iterations", max_iterations, "Iteration cap per horizon step");
        app.add_option("--steps", steps, "Receding-horizon steps");
    }

    RunConfig resolve() const {
        RunConfig c = config.empty() ? RunConfig{} : load_run_config(config);
        if (!grid_case.empty()) c.grid_case = grid_case;
        if (!base_load.empty()) c.base_load = base_load;
        if (!sessions.empty()) {
            c.sessions = sessions;
            c.fleet.reset();
        }
        if (!events.empty()) c.events = events;
        if (no_events) c.events.clear();
        if (!output_dir.empty()) c.output_dir = output_dir;
        if (seed) c.seed = *seed;
        if (threads) c.scheduler.threads = *threads;
        if (lambda) c.scheduler.lambda = *lambda;
        if (epsilon) c.scheduler.epsilon = *epsilon;
        if (max_iterations) c.scheduler.max_iterations = *max_iterations;
        if (steps) c.horizon.steps = *steps;
        return c;
    }
};

fleet::FleetSpec default_fleet_spec() {
    fleet::FleetSpec spec;
    spec.buses = {{5, 150, 0.0}, {7, 150, 0.0}, {9, 150, 0.0}};
    return spec;
}

fleet::FleetScenario load_scenario(const RunConfig& c) {
    fleet::FleetScenario scenario;
    if (c.fleet) {
        auto spec = *c.fleet;
        spec.slots = c.scheduler.slots;
        spec.slot_hours = c.scheduler.slot_hours;
        scenario = fleet::generate_fleet(c.seed, spec);
    } else if (!c.sessions.empty()) {
        scenario.sessions = fleet::read_sessions_file(c.sessions);
        scenario.slots = c.scheduler.slots;
        scenario.slot_hours = c.scheduler.slot_hours;
        scenario.normalize();
    } else {
        scenario.slots = c.scheduler.slots;
        scenario.slot_hours = c.scheduler.slot_hours;
    }
    return scenario;
}

metrics::BaseLoadProfile load_base(const RunConfig& c) {
    auto base = metrics::read_base_load_file(c.base_load);
    base.validate();
    if (base.slots != c.scheduler.slots) {
        throw ValidationError("base load covers " + std::to_string(base.slots) + " slots but the scheduler uses " +
                              std::to_string(c.scheduler.slots));
    }
    return base;
}

struct Schedules {
    fleet::FleetScenario scenario;
    coordinator::RecedingHorizonResult horizon;
    std::vector<fleet::EvSession> sessions;
    std::vector<scheduler::ChargingProfile> coordinated;
    std::vector<scheduler::ChargingProfile> uncoordinated;
};

Schedules run_schedules(const RunConfig& c, const grid::GridCase& grid, const metrics::BaseLoadProfile& base) {
    Schedules s;
    s.scenario = load_scenario(c);
    fleet::validate_scenario(s.scenario, grid);
    std::vector<coordinator::PredictionEvent> events;
    if (!c.events.empty()) events = coordinator::read_events_file(c.events);
    s.horizon = coordinator::run_receding_horizon(s.scenario, base, c.scheduler, c.horizon, events);
    s.sessions = s.horizon.sessions();
    s.coordinated = s.horizon.committed();
    for (const auto& session : s.sessions) {
        s.uncoordinated.push_back({fleet::uncoordinated_profile(session, c.scheduler.slots, c.scheduler.slot_hours)});
    }
    return s;
}

std::vector<std::string> convergence_diagnostics(const coordinator::RecedingHorizonResult& h) {
    std::vector<std::string> out;
    for (const auto& step : h.steps) {
        for (int it : step.trace.objective_increases) {
            out.push_back("bus " + std::to_string(step.bus_id) + " step " + std::to_string(step.step) +
                          ": flattening objective increased at iteration " + std::to_string(it));
        }
    }
    return out;
}

std::string solution_text(const grid::GridCase& grid, const powerflow::PowerFlowSolution& sol,
                          const std::vector<powerflow::LineFlow>& flows) {
    std::ostringstream os;
    char buf[200];
    std::snprintf(buf, sizeof buf, "Case %s: converged in %d iterations, mismatch %.3e pu\n\n",
                  grid.name().empty() ? "(unnamed)" : grid.name().c_str(), sol.iterations, sol.max_mismatch);
    os << buf;
    std::snprintf(buf, sizeof buf, "  %-4s %-6s %10s %12s %12s %12s\n", "Bus", "Kind", "V (pu)", "Angle (deg)",
                  "P (MW)", "Q (MVAr)");
    os << buf;
    const double sb = grid.s_base();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& b = grid.buses()[i];
        std::snprintf(buf, sizeof buf, "  %-4d %-6s %10.6f %12.6f %12.4f %12.4f\n", b.id,
                      std::string(grid::to_string(b.kind)).c_str(), sol.v_mag[i],
                      sol.v_angle[i] * 180.0 / std::numbers::pi, sol.p_inj[i] * sb, sol.q_inj[i] * sb);
        os << buf;
    }
    os << '\n';
    std::snprintf(buf, sizeof buf, "  %-8s %12s %12s %16s\n", "Branch", "I from (A)", "I to (A)", "Loss (MW)");
    os << buf;
    for (const auto& f : flows) {
        const std::string name = std::to_string(f.from_bus) + "-" + std::to_string(f.to_bus);
        std::snprintf(buf, sizeof buf, "  %-8s %12.3f %12.3f %16.5f\n", name.c_str(), f.i_from_amps, f.i_to_amps,
                      f.loss.real());
        os << buf;
    }
    return os.str();
}

std::string solution_csv(const grid::GridCase& grid, const powerflow::PowerFlowSolution& sol) {
    std::ostringstream os;
    os << "bus_id,kind,v_mag_pu,v_angle_deg,p_mw,q_mvar\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& b = grid.buses()[i];
        os << b.id << ',' << grid::to_string(b.kind) << ',' << csv::format_double(sol.v_mag[i]) << ','
           << csv::format_double(sol.v_angle[i] * 180.0 / std::numbers::pi) << ','
           << csv::format_double(sol.p_inj[i] * grid.s_base()) << ',' << csv::format_double(sol.q_inj[i] * grid.s_base())
           << '\n';
    }
    return os.str();
}

std::string solution_json(const grid::GridCase& grid, const powerflow::PowerFlowSolution& sol,
                          const std::vector<powerflow::LineFlow>& flows) {
    nlohmann::ordered_json j;
    j["case"] = grid.name();
    j["iterations"] = sol.iterations;
    j["max_mismatch_pu"] = sol.max_mismatch;
    j["mismatch_history"] = sol.mismatch_history;
    auto& buses = j["buses"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& b = grid.buses()[i];
        buses.push_back({{"bus_id", b.id}, {"kind", grid::to_string(b.kind)}, {"v_mag_pu", sol.v_mag[i]},
                         {"v_angle_deg", sol.v_angle[i] * 180.0 / std::numbers::pi},
                         {"p_mw", sol.p_inj[i] * grid.s_base()}, {"q_mvar", sol.q_inj[i] * grid.s_base()}});
    }
    auto& br = j["branches"] = nlohmann::ordered_json::array();
    for (const auto& f : flows) {
        br.push_back({{"from_bus", f.from_bus}, {"to_bus", f.to_bus}, {"i_from_a", f.i_from_amps},
                      {"i_to_a", f.i_to_amps}, {"p_from_mw", f.s_from.real()}, {"q_from_mvar", f.s_from.imag()},
                      {"loss_mw", f.loss.real()}});
    }
    return j.dump(2) + "\n";
}

int cmd_powerflow(const std::string& case_path, const std::string& snapshot, const std::string& format,
                  const std::string& output, double tol, int max_iter, std::ostream& out) {
    if (case_path.empty()) throw ValidationError("powerflow needs --case");
    auto grid = grid::load_grid_case_file(case_path);
    if (!snapshot.empty()) grid = grid.with_injections(io::read_snapshot_file(snapshot, grid.s_base()));
    const auto ybus = grid::build_admittance_matrix(grid);
    const auto sol = powerflow::solve_power_flow(grid, ybus, {tol, max_iter});
    const auto flows = powerflow::compute_line_flows(sol, grid);
    std::string text;
    if (format == "csv") {
        text = solution_csv(grid, sol);
    } else if (format == "json") {
        text = solution_json(grid, sol, flows);
    } else {
        text = solution_text(grid, sol, flows);
    }
    if (output.empty()) {
        out << text;
    } else {
        io::write_file(output, text);
    }
    return 0;
}

void write_schedule_outputs(const fs::path& dir, const Schedules& s) {
    io::write_file(dir / "trace.csv", io::write_trace(s.horizon.steps));
    io::write_file(dir / "schedule_coordinated.csv", io::write_schedules(s.sessions, s.coordinated));
    io::write_file(dir / "schedule_uncoordinated.csv", io::write_schedules(s.sessions, s.uncoordinated));
}

void print_summary(std::ostream& out, const metrics::ScenarioReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "peak %.2f -> %.2f MW (%.2f%% shaving); line current %.1f -> %.1f A (%.2f%% lower)\n",
                  r.peak_before_mw, r.peak_after_mw, r.peak_shaving_pct, r.total_line_current_before_a,
                  r.total_line_current_after_a, r.line_current_reduction_pct);
    out << buf;
    if (!r.diagnostics.empty()) out << r.diagnostics.size() << " diagnostic(s); see report.txt\n";
}

metrics::ScenarioReport build_report(const RunConfig& c, const grid::GridCase& grid,
                                     const metrics::BaseLoadProfile& base, std::span<const fleet::EvSession> sessions,
                                     std::span<const scheduler::ChargingProfile> uncoordinated,
                                     std::span<const scheduler::ChargingProfile> coordinated) {
    const auto u = metrics::ev_load_by_bus(sessions, uncoordinated, c.scheduler.slots);
    const auto k = metrics::ev_load_by_bus(sessions, coordinated, c.scheduler.slots);
    return metrics::compare_scenarios(grid, base, u, k, c.reactive, c.powerflow);
}

void write_report_outputs(const fs::path& dir, const RunConfig& c, const metrics::BaseLoadProfile& base,
                          const metrics::ScenarioReport& report, std::span<const fleet::EvSession> sessions,
                          std::span<const scheduler::ChargingProfile> uncoordinated,
                          std::span<const scheduler::ChargingProfile> coordinated) {
    const auto u = metrics::aggregate_load(base, metrics::ev_load_by_bus(sessions, uncoordinated, c.scheduler.slots),
                                           c.reactive);
    const auto k = metrics::aggregate_load(base, metrics::ev_load_by_bus(sessions, coordinated, c.scheduler.slots),
                                           c.reactive);
    io::write_file(dir / "report.json", metrics::report_json(report));
    io::write_file(dir / "report.txt", metrics::report_text(report));
    io::write_file(dir / "load_profile_system.csv", metrics::plot_csv_system(base, u, k));
    io::write_file(dir / "load_profile_by_bus.csv", metrics::plot_csv_by_bus(base, u, k));
}

// Sessions implied by a schedules file, enough for per-bus aggregation.
std::vector<fleet::EvSession> sessions_of(const std::vector<io::ScheduleRow>& rows) {
    std::vector<fleet::EvSession> out;
    for (const auto& r : rows) {
        fleet::EvSession s;
        s.ev_id = r.ev_id;
        s.bus_id = r.bus_id;
        out.push_back(s);
    }
    return out;
}

std::vector<scheduler::ChargingProfile> profiles_of(const std::vector<io::ScheduleRow>& rows) {
    std::vector<scheduler::ChargingProfile> out;
    for (const auto& r : rows) out.push_back(r.profile);
    return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"EV charging coordination and grid impact simulator", "evgrid"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "evgrid 1.0.0");

    auto* pf = app.add_subcommand("powerflow", "Solve the AC power flow of a grid case");
    std::string pf_case, pf_snapshot, pf_output, pf_format = "text";
    double pf_tol = 1e-8;
    int pf_max_iter = 20;
    pf->add_option("--case", pf_case, "Grid case file")->required();
    pf->add_option("--snapshot", pf_snapshot, "Injection overrides (bus_id,p_inj_mw,q_inj_mvar[,v_mag])");
    pf->add_option("--format", pf_format, "text, csv or json")->check(CLI::IsMember({"text", "csv", "json"}));
    pf->add_option("--output", pf_output, "Write to this file instead of standard output");
    pf->add_option("--tol", pf_tol, "Mismatch tolerance (pu)");
    pf->add_option("--max-iter", pf_max_iter, "Newton iteration cap");

    auto* sched = app.add_subcommand("schedule", "Run the coordinated receding-horizon schedule");
    Overrides sched_o;
    sched_o.attach(*sched, true);

    auto* sim = app.add_subcommand("simulate", "Schedule, evaluate both scenarios and write the report");
    Overrides sim_o;
    sim_o.attach(*sim, true);

    auto* cmp = app.add_subcommand("compare", "Compare two schedules files on the grid");
    Overrides cmp_o;
    cmp_o.attach(*cmp, false);
    std::string cmp_u, cmp_c;
    cmp->add_option("--uncoordinated", cmp_u, "Schedules file of the baseline")->required();
    cmp->add_option("--coordinated", cmp_c, "Schedules file of the coordinated run")->required();

    auto* gen = app.add_subcommand("gen-fleet", "Generate a synthetic sessions file");
    std::string gen_config, gen_output;
    std::optional<std::uint64_t> gen_seed;
    std::optional<int> gen_count;
    gen->add_option("-c,--config", gen_config, "JSON run configuration holding a fleet spec");
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--count", gen_count, "Sessions per bus, replacing the spec's counts");
    gen->add_option("--output", gen_output, "Write to this file instead of standard output");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*pf) return cmd_powerflow(pf_case, pf_snapshot, pf_format, pf_output, pf_tol, pf_max_iter, out);

        if (*gen) {
            RunConfig c;
            fleet::FleetSpec spec = default_fleet_spec();
            if (!gen_config.empty()) {
                c = load_run_config(gen_config);
                if (c.fleet) spec = *c.fleet;
            }
            if (gen_seed) c.seed = *gen_seed;
            if (gen_count) {
                for (auto& b : spec.buses) b.count = *gen_count;
            }
            spec.slots = c.scheduler.slots;
            spec.slot_hours = c.scheduler.slot_hours;
            const auto scenario = fleet::generate_fleet(c.seed, spec);
            const auto text = fleet::write_sessions(scenario.sessions);
            if (gen_output.empty()) {
                out << text;
            } else {
                io::write_file(gen_output, text);
            }
            for (const auto& f : scenario.flags) err << "flag: " << f.ev_id << ": " << f.reason << '\n';
            return 0;
        }

        if (*sched) {
            const auto c = sched_o.resolve();
            c.validate();
            const auto grid = grid::load_grid_case_file(c.grid_case);
            const auto base = load_base(c);
            const auto s = run_schedules(c, grid, base);
            write_schedule_outputs(c.output_dir, s);
            int iterations = 0;
            for (const auto& step : s.horizon.steps) iterations = std::max(iterations, step.trace.iterations);
            out << s.sessions.size() << " sessions scheduled over " << c.horizon.steps << " steps; at most "
                << iterations << " iterations per step\n";
            for (const auto& d : convergence_diagnostics(s.horizon)) err << "warning: " << d << '\n';
            return 0;
        }

        if (*sim) {
            const auto c = sim_o.resolve();
            c.validate();
            const auto grid = grid::load_grid_case_file(c.grid_case);
            const auto base = load_base(c);
            const auto s = run_schedules(c, grid, base);
            auto report = build_report(c, grid, base, s.sessions, s.uncoordinated, s.coordinated);
            report.flags = s.horizon.flags;
            for (auto& d : convergence_diagnostics(s.horizon)) report.diagnostics.push_back(std::move(d));
            write_schedule_outputs(c.output_dir, s);
            write_report_outputs(c.output_dir, c, base, report, s.sessions, s.uncoordinated, s.coordinated);
            print_summary(out, report);
            return 0;
        }

        if (*cmp) {
            const auto c = cmp_o.resolve();
            const auto grid = grid::load_grid_case_file(c.grid_case);
            const auto base = load_base(c);
            const auto u_rows = io::read_schedules_file(cmp_u);
            const auto c_rows = io::read_schedules_file(cmp_c);
            const auto u_sessions = sessions_of(u_rows);
            const auto c_sessions = sessions_of(c_rows);
            const auto u = metrics::ev_load_by_bus(u_sessions, profiles_of(u_rows), c.scheduler.slots);
            const auto k = metrics::ev_load_by_bus(c_sessions, profiles_of(c_rows), c.scheduler.slots);
            const auto report = metrics::compare_scenarios(grid, base, u, k, c.reactive, c.powerflow);
            const auto u_tot = metrics::aggregate_load(base, u, c.reactive);
            const auto k_tot = metrics::aggregate_load(base, k, c.reactive);
            io::write_file(c.output_dir / "report.json", metrics::report_json(report));
            io::write_file(c.output_dir / "report.txt", metrics::report_text(report));
            io::write_file(c.output_dir / "load_profile_system.csv", metrics::plot_csv_system(base, u_tot, k_tot));
            io::write_file(c.output_dir / "load_profile_by_bus.csv", metrics::plot_csv_by_bus(base, u_tot, k_tot));
            print_summary(out, report);
            return 0;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace evgrid::cli
