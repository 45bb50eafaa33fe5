#pragma once

#include <filesystem>
#include <sstream>
#include <string>

#include "evgrid/grid_model.hpp"

namespace testing {

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(EVGRID_DATA_DIR) / name; }

inline evgrid::grid::GridCase wscc9() { return evgrid::grid::load_grid_case_file(data_path("wscc9.case")); }

inline evgrid::grid::GridCase parse_case(const std::string& text) {
    std::istringstream in(text);
    return evgrid::grid::load_grid_case(in, "inline");
}

inline const char* const kTwoBus = R"([system]
s_base_mva = 100
[buses]
1 swing 1 0 0 0 230
2 pq 1 0 -50 0 230
[branches]
1 2 0 0.1
)";

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("evgrid-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
