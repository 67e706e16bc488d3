#ifndef VSNET_MATCHING_HPP
#define VSNET_MATCHING_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace vsnet {

/// Square weight matrix with an assignment mask. Row-major.
struct WeightMatrix {
  std::size_t size = 0;
  std::vector<double> weights;
  std::vector<char> allowed;

  WeightMatrix() = default;
  explicit WeightMatrix(std::size_t n) : size(n), weights(n * n, 0.0), allowed(n * n, 1) {}

  double& w(std::size_t r, std::size_t c) { return weights[r * size + c]; }
  double w(std::size_t r, std::size_t c) const { return weights[r * size + c]; }
  bool ok(std::size_t r, std::size_t c) const { return allowed[r * size + c] != 0; }
  void set_allowed(std::size_t r, std::size_t c, bool a) { allowed[r * size + c] = a ? 1 : 0; }

  void validate() const {
    if (weights.size() != size * size || allowed.size() != size * size)
      throw std::invalid_argument("weight matrix must be square");
    for (double x : weights)
      if (!std::isfinite(x))
        throw std::invalid_argument("weights must be finite");
  }
};

struct Assignment {
  std::vector<std::size_t> perm; // row -> column
  double objective = 0.0;
};

namespace detail {

// Row-order sum, shared by both solvers so equal permutations give bit-equal objectives.
inline double objective_of(const WeightMatrix& m, const std::vector<std::size_t>& perm) {
  double s = 0.0;
  for (std::size_t r = 0; r < perm.size(); ++r)
    s += m.w(r, perm[r]);
  return s;
}

// O(n^3) shortest augmenting path with potentials. cost is n*n row-major. Returns row -> column.
inline std::vector<std::size_t> min_cost_assignment(const std::vector<double>& cost, std::size_t n) {
  constexpr double inf = std::numeric_limits<double>::infinity();
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
        if (used[j])
          continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= n; ++j)
    row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

// Best objective over rows/cols not yet fixed, nullopt if no allowed completion exists.
inline std::optional<double> best_completion(const WeightMatrix& m, const std::vector<char>& row_used,
                                             const std::vector<char>& col_used) {
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < m.size; ++i) {
    if (!row_used[i])
      rows.push_back(i);
    if (!col_used[i])
      cols.push_back(i);
  }
  const std::size_t k = rows.size();
  if (k == 0)
    return 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t r : rows)
    for (std::size_t c : cols)
      if (m.ok(r, c)) {
        lo = std::min(lo, m.w(r, c));
        hi = std::max(hi, m.w(r, c));
      }
  if (hi < lo)
    return std::nullopt;
  // A single masked cell costs more than any all-allowed assignment.
  const double penalty = static_cast<double>(k + 1) * (hi - lo + 1.0);
  std::vector<double> cost(k * k);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      cost[a * k + b] = m.ok(rows[a], cols[b]) ? hi - m.w(rows[a], cols[b]) : penalty;
  const auto sol = min_cost_assignment(cost, k);
  double total = 0.0;
  for (std::size_t a = 0; a < k; ++a) {
    if (!m.ok(rows[a], cols[sol[a]]))
      return std::nullopt;
    total += m.w(rows[a], cols[sol[a]]);
  }
  return total;
}

} // namespace detail

/// Maximum-weight perfect matching restricted to allowed cells.
/// Among optimal permutations the lexicographically smallest is returned.
inline std::optional<Assignment> hungarian_max_weight(const WeightMatrix& m) {
  m.validate();
  const std::size_t n = m.size;
  std::vector<char> row_used(n, 0), col_used(n, 0);
  const auto best = detail::best_completion(m, row_used, col_used);
  if (!best)
    return std::nullopt;
  const double tol = 1e-9 * std::max(1.0, std::abs(*best));
  std::vector<std::size_t> perm(n, 0);
  double fixed = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    row_used[r] = 1;
    bool placed = false;
    for (std::size_t c = 0; c < n && !placed; ++c) {
      if (col_used[c] || !m.ok(r, c))
        continue;
      col_used[c] = 1;
      const auto rest = detail::best_completion(m, row_used, col_used);
      if (rest && fixed + m.w(r, c) + *rest >= *best - tol) {
        perm[r] = c;
        fixed += m.w(r, c);
        placed = true;
      } else {
        col_used[c] = 0;
      }
    }
    if (!placed)
      throw std::logic_error("assignment refinement lost feasibility");
  }
  return Assignment{perm, detail::objective_of(m, perm)};
}

/// Exhaustive search over all permutations. Refuses matrices larger than 8x8.
inline std::optional<Assignment> brute_force_matching(const WeightMatrix& m) {
  m.validate();
  if (m.size > 8)
    throw std::invalid_argument("brute force matching refused for size > 8");
  std::vector<std::size_t> perm(m.size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::optional<Assignment> best;
  do {
    bool ok = true;
    for (std::size_t r = 0; r < m.size && ok; ++r)
      ok = m.ok(r, perm[r]);
    if (!ok)
      continue;
    const double obj = detail::objective_of(m, perm);
    if (!best || obj > best->objective)
      best = Assignment{perm, obj};
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

} // namespace vsnet

#endif // VSNET_MATCHING_HPP
