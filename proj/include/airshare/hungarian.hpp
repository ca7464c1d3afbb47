#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "airshare/grid.hpp"

namespace airshare {

/// Result of a partial row-to-column matching; -1 marks an unmatched row.
struct Assignment {
    std::vector<int> row_to_col;
    double total = 0.0;
};

/// Minimum-cost perfect assignment on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Rows are processed in index order and ties keep the lowest
/// column, which makes the result deterministic.
inline std::vector<int> min_cost_square_assignment(const Grid2<double>& cost) {
    const std::size_t n = cost.rows();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);

    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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

    std::vector<int> row_to_col(n, -1);
    for (std::size_t j = 1; j <= n; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
    }
    return row_to_col;
}

/// Maximum-utility matching between rows and columns of a rectangular matrix where
/// each row and each column is used at most once. Pairs with utility <= 0 are never
/// matched: opting out is worth 0.
inline Assignment max_utility_assignment(const Grid2<double>& utility) {
    const std::size_t rows = utility.rows(), cols = utility.cols();
    const std::size_t n = std::max(rows, cols);
    Assignment out{std::vector<int>(rows, -1), 0.0};
    if (n == 0) return out;

    // Clamping at zero turns "leave unmatched" into a zero-utility match, so a perfect
    // matching on the padded square matrix is an optimal partial matching.
    Grid2<double> cost(n, n, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) cost(r, c) = -std::max(utility(r, c), 0.0);
    }
    const auto perfect = min_cost_square_assignment(cost);
    for (std::size_t r = 0; r < rows; ++r) {
        const int c = perfect[r];
        if (c >= 0 && static_cast<std::size_t>(c) < cols && utility(r, static_cast<std::size_t>(c)) > 0.0) {
            out.row_to_col[r] = c;
            out.total += utility(r, static_cast<std::size_t>(c));
        }
    }
    return out;
}

}  // namespace airshare
