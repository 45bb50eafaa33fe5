#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace evgrid::metrics {

/// Predicted non-EV demand per load bus, MW per slot.
struct BaseLoadProfile {
    int slots = 0;
    std::map<int, std::vector<double>> mw;

    std::vector<int> buses() const;
    const std::vector<double>& bus(int bus_id) const;
    std::vector<double> system_total() const;
    void validate() const;
};

// Base load file: slot,bus_id,mw with one row per bus per slot.
BaseLoadProfile read_base_load(std::istream& in, const std::string& source = "<base load>");
BaseLoadProfile read_base_load_file(const std::filesystem::path& path);
std::string write_base_load(const BaseLoadProfile& base);

}  // namespace evgrid::metrics
