#include "hkdelay/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hkdelay/errors.hpp"

namespace hkd {

Assignment solve_assignment(const std::vector<double>& cost, std::size_t n) {
    if (cost.size() != n * n) throw ValidationError("assignment: cost matrix is not n x n");
    for (double c : cost)
        if (!std::isfinite(c)) throw NumericError("assignment: non-finite cost entry");
    Assignment out;
    if (n == 0) return out;

    const double inf = std::numeric_limits<double>::infinity();
    // 1-based rows/columns; column 0 is the virtual start.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            const double* row = cost.data() + (i0 - 1) * n;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = row[j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    out.row_to_col.assign(n, 0);
    for (std::size_t j = 1; j <= n; ++j) out.row_to_col[p[j] - 1] = j - 1;
    // Summed from the matrix, not the potentials, to avoid drift.
    for (std::size_t i = 0; i < n; ++i) out.cost += cost[i * n + out.row_to_col[i]];
    return out;
}

}  // namespace hkd
