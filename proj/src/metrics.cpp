#include "evgrid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "evgrid/csv.hpp"
#include "evgrid/error.hpp"

namespace evgrid::metrics {

namespace {

double q_ratio(double pf) { return std::sqrt(1.0 - pf * pf) / pf; }

bool dominated(const LoadTotals& low, int slot_low, const LoadTotals& high, int slot_high) {
    for (const auto& [bus, series] : low.p_mw) {
        auto it = high.p_mw.find(bus);
        if (it == high.p_mw.end()) return false;
        if (series[static_cast<std::size_t>(slot_low)] > it->second[static_cast<std::size_t>(slot_high)]) return false;
    }
    return true;
}

}  // namespace

void ReactiveModel::validate() const {
    if (!(base_power_factor > 0.0 && base_power_factor <= 1.0) || !(ev_power_factor > 0.0 && ev_power_factor <= 1.0)) {
        throw ValidationError("power factors must lie in (0, 1]");
    }
}

BusSeries ev_load_by_bus(std::span<const fleet::EvSession> sessions,
                         std::span<const scheduler::ChargingProfile> profiles, int slots) {
    if (sessions.size() != profiles.size()) throw ValidationError("one profile per session required");
    BusSeries out;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        const auto& p = profiles[i].values;
        if (p.size() != static_cast<std::size_t>(slots)) {
            throw ValidationError("profile for " + sessions[i].ev_id + " does not match the horizon");
        }
        auto& series = out[sessions[i].bus_id];
        series.resize(static_cast<std::size_t>(slots), 0.0);
        for (std::size_t t = 0; t < p.size(); ++t) series[t] += p[t] * 1e-3;
    }
    return out;
}

std::vector<double> LoadTotals::system_p() const {
    std::vector<double> total(static_cast<std::size_t>(slots), 0.0);
    for (const auto& [bus, series] : p_mw) {
        for (std::size_t t = 0; t < total.size(); ++t) total[t] += series[t];
    }
    return total;
}

LoadTotals aggregate_load(const BaseLoadProfile& base, const BusSeries& ev_mw, const ReactiveModel& reactive) {
    base.validate();
    reactive.validate();
    const auto n = static_cast<std::size_t>(base.slots);
    const double kb = q_ratio(reactive.base_power_factor);
    const double ke = q_ratio(reactive.ev_power_factor);

    LoadTotals out;
    out.slots = base.slots;
    std::vector<int> buses = base.buses();
    for (const auto& [bus, series] : ev_mw) {
        if (series.size() != n) throw ValidationError("EV load for bus " + std::to_string(bus) + " has the wrong length");
        if (!base.mw.contains(bus)) buses.push_back(bus);
    }
    for (int bus : buses) {
        auto& p = out.p_mw[bus];
        auto& q = out.q_mvar[bus];
        p.assign(n, 0.0);
        q.assign(n, 0.0);
        auto b = base.mw.find(bus);
        auto e = ev_mw.find(bus);
        for (std::size_t t = 0; t < n; ++t) {
            const double pb = b != base.mw.end() ? b->second[t] : 0.0;
            const double pe = e != ev_mw.end() ? e->second[t] : 0.0;
            p[t] = pb + pe;
            q[t] = pb * kb + pe * ke;
        }
    }
    return out;
}

GridEvaluation evaluate_grid_at_slot(const grid::GridCase& grid, const LoadTotals& totals, int slot,
                                     const powerflow::Options& options, const powerflow::WarmStart* warm) {
    if (slot < 0 || slot >= totals.slots) throw ValidationError("slot " + std::to_string(slot) + " outside the horizon");
    std::vector<grid::InjectionOverride> overrides;
    for (const auto& [bus, series] : totals.p_mw) {
        if (!grid.has_bus(bus)) throw ValidationError("load on bus " + std::to_string(bus) + " which is not in the case");
        if (grid.bus(bus).kind != grid::BusKind::PQ) {
            throw ValidationError("load on bus " + std::to_string(bus) + " which is not a PQ bus");
        }
        const auto k = static_cast<std::size_t>(slot);
        overrides.push_back({bus, -series[k] / grid.s_base(), -totals.q_mvar.at(bus)[k] / grid.s_base(), {}});
    }
    const auto loaded = grid.with_injections(overrides);
    const auto ybus = grid::build_admittance_matrix(loaded);
    GridEvaluation out;
    out.slot = slot;
    out.solution = powerflow::solve_power_flow(loaded, ybus, options, warm);
    out.flows = powerflow::compute_line_flows(out.solution, loaded);
    return out;
}

int worst_slot(const LoadTotals& totals) {
    const auto sys = totals.system_p();
    if (sys.empty()) throw ValidationError("no slots to evaluate");
    return static_cast<int>(std::max_element(sys.begin(), sys.end()) - sys.begin());
}

double percent_reduction(double before, double after) {
    if (before == 0.0) return 0.0;
    return 100.0 * (before - after) / before;
}

ScenarioReport compare_scenarios(const grid::GridCase& grid, const BaseLoadProfile& base,
                                 const BusSeries& uncoordinated_ev_mw, const BusSeries& coordinated_ev_mw,
                                 const ReactiveModel& reactive, const powerflow::Options& options) {
    const auto before = aggregate_load(base, uncoordinated_ev_mw, reactive);
    const auto after = aggregate_load(base, coordinated_ev_mw, reactive);

    ScenarioReport r;
    r.slot_before = worst_slot(before);
    r.slot_after = worst_slot(after);
    r.peak_before_mw = before.system_p()[static_cast<std::size_t>(r.slot_before)];
    r.peak_after_mw = after.system_p()[static_cast<std::size_t>(r.slot_after)];
    r.peak_shaving_pct = percent_reduction(r.peak_before_mw, r.peak_after_mw);

    r.before = evaluate_grid_at_slot(grid, before, r.slot_before, options);
    r.after = evaluate_grid_at_slot(grid, after, r.slot_after, options);

    const auto& buses = grid.buses();
    const double s_base = grid.s_base();
    for (std::size_t i = 0; i < buses.size(); ++i) {
        r.voltages.push_back({buses[i].id, buses[i].kind, r.before.solution.v_mag[i], r.after.solution.v_mag[i]});
        if (buses[i].kind != grid::BusKind::PQ) {
            r.generation.push_back({buses[i].id, buses[i].kind, r.before.solution.p_inj[i] * s_base,
                                    r.before.solution.q_inj[i] * s_base, r.after.solution.p_inj[i] * s_base,
                                    r.after.solution.q_inj[i] * s_base});
        }
    }
    for (std::size_t k = 0; k < grid.branches().size(); ++k) {
        const auto& br = grid.branches()[k];
        BranchCurrent c{br.from_bus, br.to_bus, grid::is_line(grid, br), r.before.flows[k].i_from_amps,
                        r.after.flows[k].i_from_amps};
        if (c.line) {
            r.total_line_current_before_a += c.amps_before;
            r.total_line_current_after_a += c.amps_after;
        }
        r.currents.push_back(c);
    }
    r.line_current_reduction_pct = percent_reduction(r.total_line_current_before_a, r.total_line_current_after_a);

    const bool dominates = dominated(after, r.slot_after, before, r.slot_before);
    for (const auto& v : r.voltages) {
        if (v.kind == grid::BusKind::PQ && v.after < v.before) {
            r.diagnostics.push_back("bus " + std::to_string(v.bus_id) + " voltage fell after coordination (" +
                                    csv::format_double(v.before) + " -> " + csv::format_double(v.after) + ")" +
                                    (dominates ? " although every bus load decreased" : ""));
        }
    }
    return r;
}

std::string report_json(const ScenarioReport& r) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["peak"] = {{"before_mw", r.peak_before_mw},
                 {"after_mw", r.peak_after_mw},
                 {"shaving_pct", r.peak_shaving_pct},
                 {"slot_before", r.slot_before},
                 {"slot_after", r.slot_after}};
    auto& v = j["bus_voltages"] = ordered_json::array();
    for (const auto& b : r.voltages) {
        v.push_back({{"bus_id", b.bus_id}, {"kind", grid::to_string(b.kind)}, {"before_pu", b.before},
                     {"after_pu", b.after}});
    }
    auto& c = j["branch_currents"] = ordered_json::array();
    for (const auto& b : r.currents) {
        c.push_back({{"from_bus", b.from_bus}, {"to_bus", b.to_bus}, {"line", b.line},
                     {"before_a", b.amps_before}, {"after_a", b.amps_after}});
    }
    j["total_line_current"] = {{"before_a", r.total_line_current_before_a},
                               {"after_a", r.total_line_current_after_a},
                               {"reduction_pct", r.line_current_reduction_pct}};
    auto& g = j["generation"] = ordered_json::array();
    for (const auto& b : r.generation) {
        g.push_back({{"bus_id", b.bus_id}, {"kind", grid::to_string(b.kind)}, {"p_mw_before", b.p_mw_before},
                     {"q_mvar_before", b.q_mvar_before}, {"p_mw_after", b.p_mw_after},
                     {"q_mvar_after", b.q_mvar_after}});
    }
    j["power_flow"] = {{"iterations_before", r.before.solution.iterations},
                       {"iterations_after", r.after.solution.iterations},
                       {"mismatch_before", r.before.solution.max_mismatch},
                       {"mismatch_after", r.after.solution.max_mismatch}};
    auto& f = j["flags"] = ordered_json::array();
    for (const auto& x : r.flags) f.push_back({{"id", x.ev_id}, {"reason", x.reason}, {"slot", x.slot}});
    j["diagnostics"] = r.diagnostics;
    return j.dump(2) + "\n";
}

namespace {

std::string fmt(const char* pattern, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

std::string complex_power(double p, double q) { return fmt("%.2f %c j%.2f", p, q < 0 ? '-' : '+', std::abs(q)); }

}  // namespace

std::string report_text(const ScenarioReport& r) {
    std::ostringstream os;
    os << fmt("Peak system load: %.2f MW before (slot %d), %.2f MW after (slot %d); shaving %.2f%%\n\n",
              r.peak_before_mw, r.slot_before, r.peak_after_mw, r.slot_after, r.peak_shaving_pct);

    os << "Line current before / after coordination (A)\n";
    os << fmt("  %-10s %12s %12s\n", "Branch", "Before", "After");
    for (const auto& c : r.currents) {
        const std::string name = std::to_string(c.from_bus) + "-" + std::to_string(c.to_bus) + (c.line ? "" : " (T)");
        os << fmt("  %-10s %12.2f %12.2f\n", name.c_str(), c.amps_before, c.amps_after);
    }
    os << fmt("  %-10s %12.2f %12.2f   (%.2f%% lower)\n\n", "Lines", r.total_line_current_before_a,
              r.total_line_current_after_a, r.line_current_reduction_pct);

    os << "Generation before / after coordination (MW, MVAr)\n";
    os << fmt("  %-8s %22s %22s\n", "Bus", "Before", "After");
    for (const auto& g : r.generation) {
        const std::string name = "G" + std::to_string(g.bus_id) + (g.kind == grid::BusKind::Swing ? "*" : "");
        os << fmt("  %-8s %22s %22s\n", name.c_str(), complex_power(g.p_mw_before, g.q_mvar_before).c_str(),
                  complex_power(g.p_mw_after, g.q_mvar_after).c_str());
    }
    os << "\nBus voltage before / after coordination (pu)\n";
    os << fmt("  %-6s %10s %10s\n", "Bus", "Before", "After");
    for (const auto& v : r.voltages) os << fmt("  %-6d %10.4f %10.4f\n", v.bus_id, v.before, v.after);

    if (!r.flags.empty()) {
        os << "\nFlags\n";
        for (const auto& f : r.flags) {
            os << "  " << f.ev_id << ": " << f.reason;
            if (f.slot >= 0) os << " (slot " << f.slot << ")";
            os << '\n';
        }
    }
    if (!r.diagnostics.empty()) {
        os << "\nDiagnostics\n";
        for (const auto& d : r.diagnostics) os << "  " << d << '\n';
    }
    return os.str();
}

std::string plot_csv_system(const BaseLoadProfile& base, const LoadTotals& uncoordinated,
                            const LoadTotals& coordinated) {
    const auto b = base.system_total();
    const auto u = uncoordinated.system_p();
    const auto c = coordinated.system_p();
    std::ostringstream os;
    os << "slot,base_mw,uncoordinated_total_mw,coordinated_total_mw\n";
    for (std::size_t t = 0; t < b.size(); ++t) {
        os << t << ',' << csv::format_double(b[t]) << ',' << csv::format_double(u[t]) << ','
           << csv::format_double(c[t]) << '\n';
    }
    return os.str();
}

std::string plot_csv_by_bus(const BaseLoadProfile& base, const LoadTotals& uncoordinated,
                            const LoadTotals& coordinated) {
    std::ostringstream os;
    os << "slot,bus_id,base_mw,uncoordinated_total_mw,coordinated_total_mw\n";
    for (int t = 0; t < base.slots; ++t) {
        const auto k = static_cast<std::size_t>(t);
        for (const auto& [bus, series] : uncoordinated.p_mw) {
            auto b = base.mw.find(bus);
            const double bm = b != base.mw.end() ? b->second[k] : 0.0;
            os << t << ',' << bus << ',' << csv::format_double(bm) << ',' << csv::format_double(series[k]) << ','
               << csv::format_double(coordinated.p_mw.at(bus)[k]) << '\n';
        }
    }
    return os.str();
}

}  // namespace evgrid::metrics
