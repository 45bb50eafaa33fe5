#include "evgrid/dense_lu.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "evgrid/error.hpp"

namespace evgrid::linalg {

std::vector<double> lu_solve(DenseMatrix a, std::span<const double> b, double pivot_floor, int iteration) {
    const std::size_t n = a.size();
    std::vector<double> x(b.begin(), b.end());
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(a(k, k));
        for (std::size_t i = k + 1; i < n; ++i) {
            if (std::abs(a(i, k)) > best) {
                best = std::abs(a(i, k));
                p = i;
            }
        }
        if (best < pivot_floor) {
            throw SingularMatrixError("singular matrix: pivot " + std::to_string(k) + " below " +
                                          std::to_string(pivot_floor) + " at iteration " + std::to_string(iteration),
                                      iteration, static_cast<int>(k));
        }
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
            std::swap(x[k], x[p]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = a(i, k) / a(k, k);
            a(i, k) = m;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= m * a(k, j);
            x[i] -= m * x[k];
        }
    }
    for (std::size_t k = n; k-- > 0;) {
        double acc = x[k];
        for (std::size_t j = k + 1; j < n; ++j) acc -= a(k, j) * x[j];
        x[k] = acc / a(k, k);
    }
    return x;
}

}  // namespace evgrid::linalg
