#pragma once

#include <vector>

namespace mhop {

struct Assignment {
  std::vector<int> col_of_row;  // a permutation of 0..n-1
  double cost = 0.0;            // sum over rows, in row order
};

// Exact minimum-cost perfect matching on a square cost matrix (row-major).
// Among optimal assignments the lexicographically smallest permutation is
// returned, so ties resolve to the lowest indices.
Assignment solve_assignment(const std::vector<double>& cost, int n);

// Factorial-time reference; for tests and small n only.
Assignment brute_force_assignment(const std::vector<double>& cost, int n);

}  // namespace mhop
