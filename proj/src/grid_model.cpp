#include "evgrid/grid_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <tuple>

#include "evgrid/csv.hpp"
#include "evgrid/error.hpp"

namespace evgrid::grid {

std::string_view to_string(BusKind kind) {
    switch (kind) {
        case BusKind::Swing: return "swing";
        case BusKind::PV: return "pv";
        case BusKind::PQ: return "pq";
    }
    return "?";
}

namespace {

BusKind parse_kind(std::string_view text, const std::string& where) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "swing" || lower == "slack") return BusKind::Swing;
    if (lower == "pv") return BusKind::PV;
    if (lower == "pq") return BusKind::PQ;
    throw ParseError(where, "unknown bus kind '" + std::string(text) + "'");
}

}  // namespace

GridCase::GridCase(std::vector<Bus> buses, std::vector<Branch> branches, double s_base_mva, std::string name)
    : name_(std::move(name)), buses_(std::move(buses)), branches_(std::move(branches)), s_base_(s_base_mva) {
    if (!(s_base_ > 0.0)) throw ValidationError("s_base must be positive");
    if (buses_.empty()) throw ValidationError("case has no buses");

    std::sort(buses_.begin(), buses_.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (i > 0 && buses_[i].id == buses_[i - 1].id) {
            throw ValidationError("duplicate bus id " + std::to_string(buses_[i].id));
        }
    }
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (buses_[i].id != static_cast<int>(i) + 1) {
            throw ValidationError("bus ids must be dense 1.." + std::to_string(buses_.size()) + "; found id " +
                                  std::to_string(buses_[i].id));
        }
    }

    std::size_t swings = 0;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        const Bus& b = buses_[i];
        if (b.kind == BusKind::Swing) {
            ++swings;
            swing_ = i;
        }
        if (b.kind != BusKind::PQ && !(b.v_mag > 0.0)) {
            throw ValidationError("bus " + std::to_string(b.id) + ": voltage setpoint must be positive");
        }
        if (!(b.base_kv > 0.0)) throw ValidationError("bus " + std::to_string(b.id) + ": base_kv must be positive");
    }
    if (swings != 1) {
        throw ValidationError("case must have exactly one swing bus, found " + std::to_string(swings));
    }

    for (const Branch& br : branches_) {
        const std::string label = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
        if (!has_bus(br.from_bus)) {
            throw ValidationError(label + ": dangling endpoint, bus " + std::to_string(br.from_bus) + " does not exist");
        }
        if (!has_bus(br.to_bus)) {
            throw ValidationError(label + ": dangling endpoint, bus " + std::to_string(br.to_bus) + " does not exist");
        }
        if (br.from_bus == br.to_bus) throw ValidationError(label + ": both ends on the same bus");
        if (br.r == 0.0 && br.x == 0.0) throw ValidationError(label + ": zero-impedance branch");
        if (!(br.tap > 0.0)) throw ValidationError(label + ": tap must be positive");
    }

    // Connectivity from the swing bus.
    std::vector<std::vector<std::size_t>> adj(buses_.size());
    for (const Branch& br : branches_) {
        adj[index_of(br.from_bus)].push_back(index_of(br.to_bus));
        adj[index_of(br.to_bus)].push_back(index_of(br.from_bus));
    }
    std::vector<bool> seen(buses_.size(), false);
    std::vector<std::size_t> stack{swing_};
    seen[swing_] = true;
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (auto v : adj[u]) {
            if (!seen[v]) {
                seen[v] = true;
                stack.push_back(v);
            }
        }
    }
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (!seen[i]) {
            throw ValidationError("disconnected network: bus " + std::to_string(buses_[i].id) +
                                  " is not reachable from the swing bus");
        }
    }
}

bool GridCase::has_bus(int id) const noexcept { return id >= 1 && static_cast<std::size_t>(id) <= buses_.size(); }

std::size_t GridCase::index_of(int id) const {
    if (!has_bus(id)) throw ValidationError("unknown bus id " + std::to_string(id));
    return static_cast<std::size_t>(id - 1);
}

GridCase GridCase::with_injections(std::span<const InjectionOverride> overrides) const {
    auto buses = buses_;
    for (const auto& o : overrides) {
        Bus& b = buses[index_of(o.bus_id)];
        b.p_inj = o.p_inj;
        b.q_inj = o.q_inj;
        if (o.v_mag) b.v_mag = *o.v_mag;
    }
    return GridCase(std::move(buses), branches_, s_base_, name_);
}

std::vector<std::complex<double>> AdmittanceMatrix::multiply(std::span<const std::complex<double>> v) const {
    std::vector<std::complex<double>> out(order_);
    for (std::size_t i = 0; i < order_; ++i) {
        std::complex<double> acc{};
        for (std::size_t j = 0; j < order_; ++j) acc += (*this)(i, j) * v[j];
        out[i] = acc;
    }
    return out;
}

AdmittanceMatrix build_admittance_matrix(const GridCase& grid) {
    // Canonical branch order so the floating-point accumulation does not
    // depend on how the branches were listed.
    std::vector<Branch> branches = grid.branches();
    std::sort(branches.begin(), branches.end(), [](const Branch& a, const Branch& b) {
        return std::tie(a.from_bus, a.to_bus, a.r, a.x, a.b_shunt, a.tap) <
               std::tie(b.from_bus, b.to_bus, b.r, b.x, b.b_shunt, b.tap);
    });

    AdmittanceMatrix y(grid.size());
    for (const Branch& br : branches) {
        const auto f = grid.index_of(br.from_bus);
        const auto t = grid.index_of(br.to_bus);
        const auto ys = br.series_admittance();
        const std::complex<double> half_shunt(0.0, br.b_shunt / 2.0);
        y(f, f) += ys / (br.tap * br.tap) + half_shunt;
        y(t, t) += ys + half_shunt;
        y(f, t) -= ys / br.tap;
        y(t, f) -= ys / br.tap;
    }
    return y;
}

bool is_line(const GridCase& grid, const Branch& branch) {
    return branch.tap == 1.0 && grid.bus(branch.from_bus).base_kv == grid.bus(branch.to_bus).base_kv;
}

namespace {

enum class Section { None, System, Buses, Branches };

std::vector<std::string> tokens(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream is{std::string(line)};
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

}  // namespace

GridCase load_grid_case(std::istream& in, const std::string& source) {
    Section section = Section::None;
    std::optional<double> s_base;
    std::string name;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<std::size_t> bus_lines;
    std::vector<std::size_t> branch_lines;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = source + ":" + std::to_string(line_no);
        auto body = csv::trim(line);
        if (auto hash = body.find('#'); hash != std::string_view::npos) body = csv::trim(body.substr(0, hash));
        if (body.empty()) continue;

        if (body.front() == '[') {
            if (body == "[system]") section = Section::System;
            else if (body == "[buses]") section = Section::Buses;
            else if (body == "[branches]") section = Section::Branches;
            else throw ParseError(where, "unknown section " + std::string(body));
            continue;
        }

        switch (section) {
            case Section::None: throw ParseError(where, "content before the first section");
            case Section::System: {
                const auto eq = body.find('=');
                if (eq == std::string_view::npos) throw ParseError(where, "expected key = value");
                const auto key = csv::trim(body.substr(0, eq));
                const auto value = csv::trim(body.substr(eq + 1));
                if (key == "s_base_mva") s_base = csv::parse_double(value, where);
                else if (key == "name") name = std::string(value);
                else throw ParseError(where, "unknown system key '" + std::string(key) + "'");
                break;
            }
            case Section::Buses: {
                const auto t = tokens(body);
                if (t.size() < 2 || t.size() > 7) {
                    throw ParseError(where, "bus row needs 2 to 7 fields: id kind [v_mag v_angle_deg p_inj_mw "
                                            "q_inj_mvar base_kv]");
                }
                Bus b;
                b.id = csv::parse_int(t[0], where);
                b.kind = parse_kind(t[1], where);
                if (t.size() > 2) b.v_mag = csv::parse_double(t[2], where);
                if (t.size() > 3) b.v_angle = csv::parse_double(t[3], where) * std::numbers::pi / 180.0;
                if (t.size() > 4) b.p_inj = csv::parse_double(t[4], where);
                if (t.size() > 5) b.q_inj = csv::parse_double(t[5], where);
                if (t.size() > 6) b.base_kv = csv::parse_double(t[6], where);
                for (std::size_t k = 0; k < buses.size(); ++k) {
                    if (buses[k].id == b.id) {
                        throw ParseError(where, "duplicate bus id " + std::to_string(b.id) + " (first defined at " +
                                                    source + ":" + std::to_string(bus_lines[k]) + ")");
                    }
                }
                buses.push_back(b);
                bus_lines.push_back(line_no);
                break;
            }
            case Section::Branches: {
                const auto t = tokens(body);
                if (t.size() < 4 || t.size() > 6) {
                    throw ParseError(where, "branch row needs 4 to 6 fields: from to r_pu x_pu [b_pu tap]");
                }
                Branch br;
                br.from_bus = csv::parse_int(t[0], where);
                br.to_bus = csv::parse_int(t[1], where);
                br.r = csv::parse_double(t[2], where);
                br.x = csv::parse_double(t[3], where);
                if (t.size() > 4) br.b_shunt = csv::parse_double(t[4], where);
                if (t.size() > 5) br.tap = csv::parse_double(t[5], where);
                branches.push_back(br);
                branch_lines.push_back(line_no);
                break;
            }
        }
    }

    if (!s_base) throw ParseError(source, "missing s_base_mva in [system]");
    if (!(*s_base > 0.0)) throw ParseError(source, "s_base_mva must be positive");

    // Validation errors that can be pinned to a row carry its location.
    for (std::size_t k = 0; k < branches.size(); ++k) {
        const auto& br = branches[k];
        const std::string where = source + ":" + std::to_string(branch_lines[k]);
        for (int end : {br.from_bus, br.to_bus}) {
            const bool exists =
                std::any_of(buses.begin(), buses.end(), [end](const Bus& b) { return b.id == end; });
            if (!exists) throw ParseError(where, "dangling branch endpoint: bus " + std::to_string(end) + " does not exist");
        }
        if (br.r == 0.0 && br.x == 0.0) throw ParseError(where, "zero-impedance branch");
    }

    for (auto& b : buses) {
        b.p_inj /= *s_base;
        b.q_inj /= *s_base;
    }
    try {
        return GridCase(std::move(buses), std::move(branches), *s_base, std::move(name));
    } catch (const ValidationError& e) {
        throw ParseError(source, e.what());
    }
}

GridCase load_grid_case_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open grid case file");
    return load_grid_case(in, path.string());
}

std::string write_grid_case(const GridCase& grid) {
    std::ostringstream os;
    const auto num = [](double v) { return csv::format_double(v); };
    os << "[system]\n";
    if (!grid.name().empty()) os << "name = " << grid.name() << "\n";
    os << "s_base_mva = " << num(grid.s_base()) << "\n\n";
    os << "[buses]\n# id kind v_mag v_angle_deg p_inj_mw q_inj_mvar base_kv\n";
    for (const Bus& b : grid.buses()) {
        os << b.id << ' ' << to_string(b.kind) << ' ' << num(b.v_mag) << ' '
           << num(b.v_angle * 180.0 / std::numbers::pi) << ' ' << num(b.p_inj * grid.s_base()) << ' '
           << num(b.q_inj * grid.s_base()) << ' ' << num(b.base_kv) << "\n";
    }
    os << "\n[branches]\n# from to r_pu x_pu b_pu tap\n";
    for (const Branch& br : grid.branches()) {
        os << br.from_bus << ' ' << br.to_bus << ' ' << num(br.r) << ' ' << num(br.x) << ' ' << num(br.b_shunt) << ' '
           << num(br.tap) << "\n";
    }
    return os.str();
}

}  // namespace evgrid::grid
