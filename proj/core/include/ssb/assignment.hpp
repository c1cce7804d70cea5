#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace ssb {

struct Assignment {
  std::vector<int> col_of_row;
  double cost = 0.0;
};

// Minimum-cost assignment of every row to a distinct column (rows <= cols),
// O(rows^2 cols) shortest augmenting paths with potentials.
Assignment solve_assignment(const Eigen::MatrixXd& cost);

// Exact minimum-cost transport between integer supplies and demands of equal
// total, by successive shortest paths. Returns the flow matrix.
Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> solve_transport(
    const Eigen::MatrixXd& cost, const std::vector<std::int64_t>& supply,
    const std::vector<std::int64_t>& demand);

}  // namespace ssb
