#pragma once

// Brute-force minimizer of sum (t_s - p_s)^2 over {lo <= p_s <= hi, sum p = 1}:
// a coarse grid over the first L - 1 coordinates, then exact pairwise
// transfers that keep the sum fixed, swept until nothing moves.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace pcr::testing {

inline double qp_objective(std::span<const double> t, std::span<const double> p) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += (t[i] - p[i]) * (t[i] - p[i]);
  return s;
}

inline double brute_force_qp(std::span<const double> t, double lo, double hi, double step) {
  const std::size_t L = t.size();
  double best = INFINITY;
  std::vector<double> best_p;
  std::vector<double> p(L);
  std::function<void(std::size_t, double)> rec = [&](std::size_t k, double used) {
    if (k == L - 1) {
      const double last = 1.0 - used;
      if (last < lo - 1e-12 || last > hi + 1e-12) return;
      p[k] = last;
      const double f = qp_objective(t, p);
      if (f < best) {
        best = f;
        best_p = p;
      }
      return;
    }
    // Always include the upper end so narrow boxes still have grid points.
    for (double x = lo;; x += step) {
      const double v = std::min(x, hi);
      if (used + v > 1.0 + 1e-12) break;
      p[k] = v;
      rec(k + 1, used + v);
      if (v >= hi) break;
    }
  };
  rec(0, 0.0);
  if (best_p.empty()) {
    // Grid missed the feasible set; start from the uniform point (always feasible).
    best_p.assign(L, 1.0 / static_cast<double>(L));
  }
  p = best_p;
  for (int sweep = 0; sweep < 100000; ++sweep) {
    double moved = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = i + 1; j < L; ++j) {
        // Move d from j to i: minimize (t_i - p_i - d)^2 + (t_j - p_j + d)^2.
        double d = 0.5 * ((t[i] - p[i]) - (t[j] - p[j]));
        d = std::clamp(d, std::max(lo - p[i], p[j] - hi), std::min(hi - p[i], p[j] - lo));
        p[i] += d;
        p[j] -= d;
        moved = std::max(moved, std::fabs(d));
      }
    }
    if (moved < 1e-16) break;
  }
  return qp_objective(t, p);
}

inline double brute_force_qp(std::span<const double> t, double lo, double hi) {
  return brute_force_qp(t, lo, hi, t.size() <= 4 ? 1e-3 : 1e-2);
}

}  // namespace pcr::testing
