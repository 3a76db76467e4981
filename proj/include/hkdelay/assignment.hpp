#pragma once

// Minimum-cost perfect matching on a dense square cost matrix (Hungarian
// method with potentials, O(n^3)).

#include <cstddef>
#include <vector>

namespace hkd {

struct Assignment {
    /// column assigned to each row
    std::vector<std::size_t> row_to_col;
    double cost = 0.0;
};

/// cost is n x n, row-major. Entries must be finite.
Assignment solve_assignment(const std::vector<double>& cost, std::size_t n);

}  // namespace hkd
