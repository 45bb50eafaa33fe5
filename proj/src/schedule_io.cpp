#include "evgrid/schedule_io.hpp"

#include <fstream>
#include <sstream>

#include "evgrid/csv.hpp"
#include "evgrid/error.hpp"

namespace evgrid::io {

std::string write_schedules(std::span<const fleet::EvSession> sessions,
                            std::span<const scheduler::ChargingProfile> profiles) {
    if (sessions.size() != profiles.size()) throw ValidationError("one profile per session required");
    std::size_t slots = profiles.empty() ? 0 : profiles.front().values.size();
    std::ostringstream os;
    os << "ev_id,bus_id";
    for (std::size_t t = 0; t < slots; ++t) os << ",kw_" << t;
    os << '\n';
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        if (profiles[i].values.size() != slots) throw ValidationError("profiles differ in length");
        os << sessions[i].ev_id << ',' << sessions[i].bus_id;
        for (double v : profiles[i].values) os << ',' << csv::format_double(v);
        os << '\n';
    }
    return os.str();
}

std::vector<ScheduleRow> read_schedules(std::istream& in, const std::string& source) {
    const auto table = csv::Table::parse(in, source);
    const auto c_id = table.column("ev_id");
    const auto c_bus = table.column("bus_id");
    std::vector<std::size_t> slot_cols;
    for (std::size_t t = 0;; ++t) {
        auto c = table.find_column("kw_" + std::to_string(t));
        if (!c) break;
        slot_cols.push_back(*c);
    }
    if (table.header().size() != slot_cols.size() + 2) {
        throw ParseError(source, "schedule header must be ev_id,bus_id,kw_0..kw_{T-1}");
    }
    std::vector<ScheduleRow> out;
    for (const auto& row : table.rows()) {
        ScheduleRow r;
        r.ev_id = table.field(row, c_id);
        r.bus_id = table.integer(row, c_bus);
        for (auto c : slot_cols) r.profile.values.push_back(table.number(row, c));
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ScheduleRow> read_schedules_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open schedules file");
    return read_schedules(in, path.string());
}

std::string write_trace(std::span<const coordinator::StepTrace> steps) {
    std::ostringstream os;
    os << "bus_id,step,first_slot,events_applied,iteration,residual,objective\n";
    for (const auto& s : steps) {
        const auto prefix = [&] {
            os << s.bus_id << ',' << s.step << ',' << s.first_slot << ',' << (s.events_applied ? 1 : 0) << ',';
        };
        if (s.trace.entries.empty()) {
            // A step that resumed an already converged plan.
            prefix();
            os << 0 << ',' << csv::format_double(s.trace.final_residual) << ','
               << csv::format_double(s.trace.initial_objective) << '\n';
        }
        for (const auto& e : s.trace.entries) {
            prefix();
            os << e.iteration << ',' << csv::format_double(e.residual) << ',' << csv::format_double(e.objective)
               << '\n';
        }
    }
    return os.str();
}

std::vector<grid::InjectionOverride> read_snapshot(std::istream& in, double s_base_mva, const std::string& source) {
    const auto table = csv::Table::parse(in, source);
    const auto c_bus = table.column("bus_id");
    const auto c_p = table.column("p_inj_mw");
    const auto c_q = table.column("q_inj_mvar");
    const auto c_v = table.find_column("v_mag");
    std::vector<grid::InjectionOverride> out;
    for (const auto& row : table.rows()) {
        grid::InjectionOverride o;
        o.bus_id = table.integer(row, c_bus);
        o.p_inj = table.number(row, c_p) / s_base_mva;
        o.q_inj = table.number(row, c_q) / s_base_mva;
        if (c_v) o.v_mag = table.optional_number(row, *c_v);
        out.push_back(o);
    }
    return out;
}

std::vector<grid::InjectionOverride> read_snapshot_file(const std::filesystem::path& path, double s_base_mva) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open snapshot file");
    return read_snapshot(in, s_base_mva, path.string());
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace evgrid::io
