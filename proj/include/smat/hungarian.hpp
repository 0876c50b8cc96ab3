#pragma once

#include <vector>

#include "smat/tensor.hpp"

namespace smat {

/// Minimum-cost one-to-one assignment on a rectangular (n x m) cost matrix.
/// min(n, m) pairs are assigned. Returns, per row, the assigned column or -1.
std::vector<int> hungarian(const Tensor& cost);

/// Total cost of a row-to-column assignment (-1 entries skipped).
double assignment_cost(const Tensor& cost, const std::vector<int>& row_to_col);

} // namespace smat
