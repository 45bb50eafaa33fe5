#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace evgrid::linalg {

/// Square row-major matrix of doubles.
class DenseMatrix {
public:
    explicit DenseMatrix(std::size_t n = 0) : n_(n), a_(n * n, 0.0) {}

    std::size_t size() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

private:
    std::size_t n_;
    std::vector<double> a_;
};

/// Solves A x = b by LU with partial pivoting. A pivot whose magnitude falls
/// below `pivot_floor` raises SingularMatrixError naming the pivot column.
std::vector<double> lu_solve(DenseMatrix a, std::span<const double> b, double pivot_floor = 1e-12, int iteration = 0);

}  // namespace evgrid::linalg
