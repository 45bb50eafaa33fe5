#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace evgrid {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input document. `where` is "source:line" when known.
class ParseError : public Error {
public:
    ParseError(const std::string& where, const std::string& what)
        : Error(where.empty() ? what : where + ": " + what), where_(where) {}
    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, int iterations, double final_mismatch)
        : Error(what), iterations_(iterations), final_mismatch_(final_mismatch) {}
    int iterations() const noexcept { return iterations_; }
    double final_mismatch() const noexcept { return final_mismatch_; }

private:
    int iterations_;
    double final_mismatch_;
};

class SingularMatrixError : public Error {
public:
    SingularMatrixError(const std::string& what, int iteration, int pivot)
        : Error(what), iteration_(iteration), pivot_(pivot) {}
    int iteration() const noexcept { return iteration_; }
    int pivot() const noexcept { return pivot_; }

private:
    int iteration_;
    int pivot_;
};

/// Energy demand outside the interval reachable within the rate bounds.
class InfeasibleSessionError : public Error {
public:
    InfeasibleSessionError(const std::string& ev_id, double energy_kwh, double lo_kwh, double hi_kwh);
    const std::string& ev_id() const noexcept { return ev_id_; }
    double lower_kwh() const noexcept { return lo_; }
    double upper_kwh() const noexcept { return hi_; }

private:
    std::string ev_id_;
    double lo_;
    double hi_;
};

/// A broadcast round that did not collect one update per station.
class ProtocolError : public Error {
public:
    ProtocolError(const std::string& what, std::vector<std::string> silent)
        : Error(what), silent_(std::move(silent)) {}
    const std::vector<std::string>& silent_stations() const noexcept { return silent_; }

private:
    std::vector<std::string> silent_;
};

}  // namespace evgrid
