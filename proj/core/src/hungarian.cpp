#include "mhop/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mhop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double row_order_cost(const std::vector<double>& cost, int n, const std::vector<int>& perm) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += cost[static_cast<std::size_t>(i * n + perm[static_cast<std::size_t>(i)])];
  return s;
}

// Shortest augmenting path with potentials, O(n^3). `a` is 1-indexed
// internally as in the classic formulation.
std::vector<int> hungarian(const std::vector<double>& a, int n) {
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), kInf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = a[static_cast<std::size_t>((i0 - 1) * n + (j - 1))] - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
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
    } while (j0);
  }
  std::vector<int> col_of_row(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) col_of_row[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return col_of_row;
}

}  // namespace

Assignment solve_assignment(const std::vector<double>& cost, int n) {
  if (n < 0 || cost.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw std::invalid_argument("solve_assignment: cost matrix must be n x n");
  }
  for (double c : cost) {
    if (!std::isfinite(c)) throw std::invalid_argument("solve_assignment: non-finite cost");
  }
  Assignment best;
  if (n == 0) return best;
  best.col_of_row = hungarian(cost, n);
  best.cost = row_order_cost(cost, n, best.col_of_row);
  double scale = 1.0;
  for (double c : cost) scale = std::max(scale, std::fabs(c));
  const double tol = 1e-9 * scale * n;

  // Fix rows in order to the smallest column that still admits an optimum.
  std::vector<int> fixed(static_cast<std::size_t>(n), -1);
  std::vector<char> col_used(static_cast<std::size_t>(n), 0);
  double fixed_cost = 0.0;
  for (int i = 0; i < n; ++i) {
    const int rem = n - i - 1;
    for (int j = 0; j < n; ++j) {
      if (col_used[static_cast<std::size_t>(j)]) continue;
      double rest = 0.0;
      if (rem > 0) {
        std::vector<int> rows, cols;
        for (int r = i + 1; r < n; ++r) rows.push_back(r);
        for (int c = 0; c < n; ++c) {
          if (!col_used[static_cast<std::size_t>(c)] && c != j) cols.push_back(c);
        }
        std::vector<double> sub(static_cast<std::size_t>(rem * rem));
        for (int r = 0; r < rem; ++r) {
          for (int c = 0; c < rem; ++c) {
            sub[static_cast<std::size_t>(r * rem + c)] =
                cost[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)] * n + cols[static_cast<std::size_t>(c)])];
          }
        }
        const auto perm = hungarian(sub, rem);
        rest = row_order_cost(sub, rem, perm);
      }
      const double total = fixed_cost + cost[static_cast<std::size_t>(i * n + j)] + rest;
      if (total <= best.cost + tol) {
        fixed[static_cast<std::size_t>(i)] = j;
        col_used[static_cast<std::size_t>(j)] = 1;
        fixed_cost += cost[static_cast<std::size_t>(i * n + j)];
        break;
      }
    }
    if (fixed[static_cast<std::size_t>(i)] < 0) throw std::logic_error("solve_assignment: tie resolution failed");
  }
  const double fixed_total = row_order_cost(cost, n, fixed);
  // Keep the solver's own permutation when it already is the smallest one,
  // or when rounding made the fixed-up variant look marginally worse.
  if (fixed != best.col_of_row && fixed_total <= best.cost + tol) {
    best.col_of_row = fixed;
    best.cost = fixed_total;
  }
  return best;
}

Assignment brute_force_assignment(const std::vector<double>& cost, int n) {
  if (cost.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw std::invalid_argument("brute_force_assignment: cost matrix must be n x n");
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Assignment best;
  best.cost = kInf;
  do {
    const double c = row_order_cost(cost, n, perm);
    if (c < best.cost) {
      best.cost = c;
      best.col_of_row = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (n == 0) best.cost = 0.0;
  return best;
}

}  // namespace mhop
