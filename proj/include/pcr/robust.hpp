#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcr/core.hpp"

namespace pcr {

struct QpSolution {
  std::vector<double> p;
  double objective = 0.0;   // sum_s (target_s - p_s)^2
  double multiplier = 0.0;  // p_s = clamp(target_s + multiplier, lower, upper)
};

// Minimizes sum_s (targets_s - p_s)^2 subject to lower <= p_s <= upper and
// sum_s p_s = 1. Requires L * lower <= 1 <= L * upper.
QpSolution solve_box_simplex_qp(std::span<const double> targets, double lower, double upper);

// max_s |p_s - clamp(t_s + mu)| together with |sum p - 1|.
double qp_kkt_residual(const QpSolution& sol, std::span<const double> targets, double lower, double upper);

// Box bounds used by the robust statistic: [max(0, 1/L - delta), 1/L + delta].
double robust_lower(int L, double delta);
double robust_upper(int L, double delta);

// min over the box-simplex of (L / (n (1 + L delta))) sum_s (W_s - n p_s)^2.
double robust_statistic(const LabelCounts& counts, int L, double delta);

// Pinsker bound on TV(N(0,1), N(0,(1+eta)^2)).
double pinsker_delta_gaussian(double eta);

struct RobustConfig {
  PcrConfig pcr;
  double delta = 0.0;
  void validate() const;
};

struct RobustPcrResult {
  PcrResult pcr;  // statistic, p-values and reject use the robust statistic
  double delta = 0.0;
  double qp_objective = 0.0;
  std::vector<double> p_hat;
  double plain_statistic = 0.0;
};

RobustPcrResult summarize_robust(LabelCounts counts, const RobustConfig& cfg);

RobustPcrResult run_robust_pcr(const Dataset& data, const ConditionalSampler& sampler_hat, const ScoreFunction& score,
                               const RobustConfig& cfg, std::uint64_t seed);

}  // namespace pcr
