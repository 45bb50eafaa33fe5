#include "evgrid/error.hpp"

#include <sstream>

namespace evgrid {

namespace {
std::string infeasible_message(const std::string& ev_id, double energy, double lo, double hi) {
    std::ostringstream os;
    os.precision(12);
    os << "session " << ev_id << ": energy " << energy << " kWh outside feasible interval [" << lo << ", " << hi
       << "] kWh";
    return os.str();
}
}  // namespace

InfeasibleSessionError::InfeasibleSessionError(const std::string& ev_id, double energy_kwh, double lo_kwh,
                                               double hi_kwh)
    : Error(infeasible_message(ev_id, energy_kwh, lo_kwh, hi_kwh)), ev_id_(ev_id), lo_(lo_kwh), hi_(hi_kwh) {}

}  // namespace evgrid
