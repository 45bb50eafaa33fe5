#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evgrid::grid {

enum class BusKind { Swing, PV, PQ };

std::string_view to_string(BusKind kind);

/// Network node. Angles in radians, powers in per-unit on the case base.
/// Injections follow the generator convention (generation minus load).
struct Bus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double v_mag = 1.0;
    double v_angle = 0.0;
    double p_inj = 0.0;
    double q_inj = 0.0;
    double base_kv = 230.0;
};

/// Pi-model branch, per-unit on the case base. The tap sits on the from side.
struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_shunt = 0.0;
    double tap = 1.0;

    std::complex<double> series_admittance() const { return 1.0 / std::complex<double>(r, x); }
};

struct InjectionOverride {
    int bus_id = 0;
    double p_inj = 0.0;
    double q_inj = 0.0;
    std::optional<double> v_mag;
};

/// Validated electrical network. Buses are stored sorted by id; ids are
/// exactly 1..M so a bus's index is id - 1.
class GridCase {
public:
    GridCase(std::vector<Bus> buses, std::vector<Branch> branches, double s_base_mva, std::string name = {});

    const std::string& name() const noexcept { return name_; }
    double s_base() const noexcept { return s_base_; }
    std::size_t size() const noexcept { return buses_.size(); }
    const std::vector<Bus>& buses() const noexcept { return buses_; }
    const std::vector<Branch>& branches() const noexcept { return branches_; }

    bool has_bus(int id) const noexcept;
    std::size_t index_of(int id) const;
    const Bus& bus(int id) const { return buses_[index_of(id)]; }
    std::size_t swing_index() const noexcept { return swing_; }

    /// Copy with the listed buses' injections (and optionally voltage
    /// setpoints) replaced; everything else untouched.
    GridCase with_injections(std::span<const InjectionOverride> overrides) const;

private:
    std::string name_;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    double s_base_ = 100.0;
    std::size_t swing_ = 0;
};

/// Dense complex nodal admittance matrix, row-major.
class AdmittanceMatrix {
public:
    explicit AdmittanceMatrix(std::size_t order = 0) : order_(order), entries_(order * order) {}

    std::size_t order() const noexcept { return order_; }
    std::complex<double>& operator()(std::size_t i, std::size_t j) { return entries_[i * order_ + j]; }
    const std::complex<double>& operator()(std::size_t i, std::size_t j) const { return entries_[i * order_ + j]; }

    double magnitude(std::size_t i, std::size_t j) const { return std::abs((*this)(i, j)); }
    double angle(std::size_t i, std::size_t j) const { return std::arg((*this)(i, j)); }

    std::span<const std::complex<double>> entries() const noexcept { return entries_; }

    /// I = Y V
    std::vector<std::complex<double>> multiply(std::span<const std::complex<double>> v) const;

    bool operator==(const AdmittanceMatrix&) const = default;

private:
    std::size_t order_;
    std::vector<std::complex<double>> entries_;
};

AdmittanceMatrix build_admittance_matrix(const GridCase& grid);

/// Sectioned text format: [system], [buses], [branches]. Angles in degrees
/// and powers in MW/MVAr at the file boundary.
GridCase load_grid_case(std::istream& in, const std::string& source = "<input>");
GridCase load_grid_case_file(const std::filesystem::path& path);
std::string write_grid_case(const GridCase& grid);

/// True when both ends share a nominal voltage and the tap is nominal,
/// i.e. the branch is a transmission line rather than a transformer.
bool is_line(const GridCase& grid, const Branch& branch);

}  // namespace evgrid::grid
