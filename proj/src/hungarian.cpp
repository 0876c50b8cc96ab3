#include "smat/hungarian.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace smat {

namespace {

// Shortest augmenting path with potentials; requires n <= m. Arrays are
// 1-based with column 0 as the virtual source.
std::vector<int> solve_rows_le_cols(int n, int m, const auto& cost) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(m) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(m) + 1, 0), way(static_cast<std::size_t>(m) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(m) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int j = 1; j <= m; ++j)
        if (p[static_cast<std::size_t>(j)] != 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

} // namespace

std::vector<int> hungarian(const Tensor& cost) {
    if (cost.rank() != 2) throw std::invalid_argument("hungarian: cost must be a matrix");
    const int n = cost.dim(0), m = cost.dim(1);
    for (double c : cost.values())
        if (!std::isfinite(c)) throw std::invalid_argument("hungarian: non-finite cost");
    if (n == 0 || m == 0) return std::vector<int>(static_cast<std::size_t>(n), -1);
    if (n <= m) return solve_rows_le_cols(n, m, [&](int r, int c) { return cost.at(r, c); });

    const std::vector<int> col_to_row = solve_rows_le_cols(m, n, [&](int r, int c) { return cost.at(c, r); });
    std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
    for (int c = 0; c < m; ++c) row_to_col[static_cast<std::size_t>(col_to_row[static_cast<std::size_t>(c)])] = c;
    return row_to_col;
}

double assignment_cost(const Tensor& cost, const std::vector<int>& row_to_col) {
    double total = 0.0;
    for (std::size_t r = 0; r < row_to_col.size(); ++r)
        if (row_to_col[r] >= 0) total += cost.at(static_cast<int>(r), row_to_col[r]);
    return total;
}

} // namespace smat
