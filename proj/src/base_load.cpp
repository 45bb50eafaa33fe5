#include "evgrid/base_load.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evgrid/csv.hpp"
#include "evgrid/error.hpp"

namespace evgrid::metrics {

std::vector<int> BaseLoadProfile::buses() const {
    std::vector<int> out;
    for (const auto& [bus, series] : mw) out.push_back(bus);
    return out;
}

const std::vector<double>& BaseLoadProfile::bus(int bus_id) const {
    auto it = mw.find(bus_id);
    if (it == mw.end()) throw ValidationError("no base load for bus " + std::to_string(bus_id));
    return it->second;
}

std::vector<double> BaseLoadProfile::system_total() const {
    std::vector<double> total(static_cast<std::size_t>(slots), 0.0);
    for (const auto& [bus, series] : mw) {
        for (std::size_t t = 0; t < total.size(); ++t) total[t] += series[t];
    }
    return total;
}

void BaseLoadProfile::validate() const {
    if (slots < 1) throw ValidationError("base load: slots must be >= 1");
    for (const auto& [bus, series] : mw) {
        if (series.size() != static_cast<std::size_t>(slots)) {
            throw ValidationError("base load for bus " + std::to_string(bus) + " has the wrong length");
        }
        for (std::size_t t = 0; t < series.size(); ++t) {
            if (!std::isfinite(series[t]) || series[t] < 0.0) {
                throw ValidationError("base load for bus " + std::to_string(bus) + " slot " + std::to_string(t) +
                                      " must be finite and >= 0");
            }
        }
    }
}

BaseLoadProfile read_base_load(std::istream& in, const std::string& source) {
    const auto table = csv::Table::parse(in, source);
    const auto c_slot = table.column("slot");
    const auto c_bus = table.column("bus_id");
    const auto c_mw = table.column("mw");

    std::map<int, std::map<int, double>> cells;
    int max_slot = -1;
    for (const auto& row : table.rows()) {
        const int slot = table.integer(row, c_slot);
        const int bus = table.integer(row, c_bus);
        const double mw = table.number(row, c_mw);
        if (slot < 0) throw ParseError(table.where(row), "slot must be >= 0");
        if (mw < 0.0) throw ParseError(table.where(row), "mw must be >= 0");
        if (!cells[bus].emplace(slot, mw).second) {
            throw ParseError(table.where(row), "duplicate row for bus " + std::to_string(bus) + " slot " +
                                                   std::to_string(slot));
        }
        max_slot = std::max(max_slot, slot);
    }

    BaseLoadProfile base;
    base.slots = max_slot + 1;
    for (const auto& [bus, by_slot] : cells) {
        if (static_cast<int>(by_slot.size()) != base.slots) {
            throw ParseError(source, "bus " + std::to_string(bus) + " does not cover slots 0.." +
                                         std::to_string(max_slot));
        }
        auto& series = base.mw[bus];
        for (const auto& [slot, mw] : by_slot) series.push_back(mw);
    }
    if (base.mw.empty()) throw ParseError(source, "base load file has no rows");
    return base;
}

BaseLoadProfile read_base_load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open base load file");
    return read_base_load(in, path.string());
}

std::string write_base_load(const BaseLoadProfile& base) {
    std::ostringstream os;
    os << "slot,bus_id,mw\n";
    for (int t = 0; t < base.slots; ++t) {
        for (const auto& [bus, series] : base.mw) {
            os << t << ',' << bus << ',' << csv::format_double(series[static_cast<std::size_t>(t)]) << '\n';
        }
    }
    return os.str();
}

}  // namespace evgrid::metrics
