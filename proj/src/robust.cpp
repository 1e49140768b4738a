#include "pcr/robust.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pcr {

namespace {

double clamp_sum(std::span<const double> t, double mu, double lower, double upper) {
  double s = 0.0;
  for (double v : t) s += std::clamp(v + mu, lower, upper);
  return s;
}

void fill_solution(QpSolution& sol, std::span<const double> t, double lower, double upper) {
  sol.p.resize(t.size());
  sol.objective = 0.0;
  for (std::size_t s = 0; s < t.size(); ++s) {
    sol.p[s] = std::clamp(t[s] + sol.multiplier, lower, upper);
    const double d = t[s] - sol.p[s];
    sol.objective += d * d;
  }
}

}  // namespace

QpSolution solve_box_simplex_qp(std::span<const double> targets, double lower, double upper) {
  const auto L = static_cast<double>(targets.size());
  if (targets.empty()) throw std::domain_error("solve_box_simplex_qp: no targets");
  if (!(lower <= upper) || L * lower > 1.0 + 1e-15 || L * upper < 1.0 - 1e-15) {
    throw std::domain_error("solve_box_simplex_qp: infeasible box");
  }
  const auto [tmin, tmax] = std::minmax_element(targets.begin(), targets.end());

  QpSolution sol;
  if (upper - lower <= 0.0) {
    sol.multiplier = lower - *tmin;
    fill_solution(sol, targets, lower, upper);
    return sol;
  }

  // sum_s clamp(t_s + mu) is nondecreasing in mu; bisect for the root of sum = 1.
  double lo = lower - *tmax;
  double hi = upper - *tmin;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double s = clamp_sum(targets, mid, lower, upper);
    if (std::fabs(s - 1.0) <= 1e-14) {
      lo = hi = mid;
      break;
    }
    if (s < 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  sol.multiplier = 0.5 * (lo + hi);

  // Solve exactly on the active set found by bisection.
  double fixed = 0.0;
  double free_sum = 0.0;
  int free_count = 0;
  for (double t : targets) {
    const double v = t + sol.multiplier;
    if (v <= lower) {
      fixed += lower;
    } else if (v >= upper) {
      fixed += upper;
    } else {
      free_sum += t;
      ++free_count;
    }
  }
  if (free_count > 0) {
    const double mu = (1.0 - fixed - free_sum) / free_count;
    bool consistent = true;
    for (double t : targets) {
      const double v_old = t + sol.multiplier;
      const double v_new = t + mu;
      const bool was_free = v_old > lower && v_old < upper;
      if (was_free && (v_new < lower || v_new > upper)) consistent = false;
    }
    if (consistent) sol.multiplier = mu;
  }
  fill_solution(sol, targets, lower, upper);
  return sol;
}

double qp_kkt_residual(const QpSolution& sol, std::span<const double> targets, double lower, double upper) {
  double worst = 0.0;
  double sum = 0.0;
  for (std::size_t s = 0; s < targets.size(); ++s) {
    worst = std::max(worst, std::fabs(sol.p[s] - std::clamp(targets[s] + sol.multiplier, lower, upper)));
    sum += sol.p[s];
  }
  return std::max(worst, std::fabs(sum - 1.0));
}

double robust_lower(int L, double delta) { return std::max(0.0, 1.0 / L - delta); }
double robust_upper(int L, double delta) { return 1.0 / L + delta; }

double robust_statistic(const LabelCounts& counts, int L, double delta) {
  if (!(delta >= 0.0)) throw std::domain_error("robust_statistic: delta must be non-negative");
  if (delta == 0.0) return pcr_statistic(counts, L);
  if (counts.n == 0 || static_cast<int>(counts.w.size()) != L) throw std::domain_error("robust_statistic: bad counts");
  const auto n = static_cast<double>(counts.n);
  std::vector<double> targets(counts.w.size());
  for (std::size_t s = 0; s < targets.size(); ++s) targets[s] = static_cast<double>(counts.w[s]) / n;
  const QpSolution sol = solve_box_simplex_qp(targets, robust_lower(L, delta), robust_upper(L, delta));
  return static_cast<double>(L) * n / (1.0 + L * delta) * sol.objective;
}

double pinsker_delta_gaussian(double eta) {
  if (!(eta > -1.0)) throw std::domain_error("pinsker_delta_gaussian: eta must exceed -1");
  const double s = 1.0 + eta;
  const double kl = std::log(s) + 1.0 / (2.0 * s * s) - 0.5;
  return std::sqrt(0.5 * std::max(kl, 0.0));
}

void RobustConfig::validate() const {
  pcr.validate();
  if (!(delta >= 0.0)) throw std::domain_error("delta must be non-negative");
}

RobustPcrResult summarize_robust(LabelCounts counts, const RobustConfig& cfg) {
  cfg.validate();
  const int L = cfg.pcr.L;
  RobustPcrResult out;
  out.delta = cfg.delta;
  out.plain_statistic = pcr_statistic(counts, L);

  const auto n = static_cast<double>(counts.n);
  std::vector<double> targets(counts.w.size());
  for (std::size_t s = 0; s < targets.size(); ++s) targets[s] = static_cast<double>(counts.w[s]) / n;
  const QpSolution sol = solve_box_simplex_qp(targets, robust_lower(L, cfg.delta), robust_upper(L, cfg.delta));
  out.qp_objective = sol.objective;
  out.p_hat = sol.p;

  PcrResult& r = out.pcr;
  r.L = L;
  r.K = cfg.pcr.K;
  r.alpha = cfg.pcr.alpha;
  r.threshold_kind = cfg.pcr.threshold_kind;
  r.statistic = robust_statistic(counts, L, cfg.delta);
  r.threshold = threshold(cfg.pcr.threshold_kind, L, cfg.pcr.alpha);
  r.p_finite = p_value_finite(r.statistic, L);
  r.p_asym = p_value_asym(r.statistic, L);
  r.reject = r.statistic >= r.threshold;
  r.counts = std::move(counts);
  return out;
}

RobustPcrResult run_robust_pcr(const Dataset& data, const ConditionalSampler& sampler_hat, const ScoreFunction& score,
                               const RobustConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  data.validate();
  auto ranks = pcr_ranks(data, sampler_hat, score, cfg.pcr.M(), cfg.pcr.ties, seed, 0);
  RobustPcrResult out = summarize_robust(count_labels(ranks, cfg.pcr.K, cfg.pcr.L), cfg);
  out.pcr.ranks = std::move(ranks);
  out.pcr.seed = seed;
  return out;
}

}  // namespace pcr
