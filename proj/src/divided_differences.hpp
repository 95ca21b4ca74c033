#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>

#include "sparsemm/penalty.hpp"

namespace sparsemm::detail {

// 2 f[x0,x1,x2] over consecutive triples; approximates f'' at the middle point.
template <class F>
ConcavityReport scan_second_differences(std::span<const double> grid, F&& f, double tol) {
  if (grid.size() < 3) throw std::invalid_argument("concavity scan needs at least 3 grid points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("concavity grid must be strictly increasing");
  }
  ConcavityReport report;
  report.worst_second_difference = -std::numeric_limits<double>::infinity();
  double f0 = f(grid[0]);
  double f1 = f(grid[1]);
  for (std::size_t i = 2; i < grid.size(); ++i) {
    const double f2 = f(grid[i]);
    const double left = (f1 - f0) / (grid[i - 1] - grid[i - 2]);
    const double right = (f2 - f1) / (grid[i] - grid[i - 1]);
    const double second = 2.0 * (right - left) / (grid[i] - grid[i - 2]);
    if (second > report.worst_second_difference) {
      report.worst_second_difference = second;
      report.worst_at = grid[i - 1];
    }
    f0 = f1;
    f1 = f2;
  }
  report.concave = report.worst_second_difference <= tol;
  return report;
}

}  // namespace sparsemm::detail
