#include "pcr/parameter_free.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace pcr {

void PfConfig::validate() const {
  if (grid.empty()) throw std::domain_error("parameter-free grid is empty");
  std::set<int> seen;
  for (int L : grid) {
    if (L < 2) throw std::domain_error("parameter-free grid entries must be at least 2");
    if (!seen.insert(L).second) throw std::domain_error("parameter-free grid entries must be distinct");
  }
  if (K < 1) throw std::domain_error("K must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0, 1)");
  if (shared_counterfeits) {
    const int positions = K * *std::max_element(grid.begin(), grid.end());
    for (int L : grid) {
      if (positions % L != 0) throw std::domain_error("shared counterfeits need every L to divide K * max(L)");
    }
  }
}

PfResult run_parameter_free(const Dataset& data, const ConditionalSampler& sampler, const ScoreFunction& score,
                            const PfConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  data.validate();

  PfResult res;
  res.grid = cfg.grid;
  res.alpha = cfg.alpha;
  res.K = cfg.K;
  res.p_kind = cfg.p_kind;
  res.seed = seed;

  std::vector<int> shared_ranks;
  int positions = 0;
  if (cfg.shared_counterfeits) {
    positions = cfg.K * *std::max_element(cfg.grid.begin(), cfg.grid.end());
    shared_ranks = pcr_ranks(data, sampler, score, positions - 1, TieRule::literal, seed, 0);
  }

  double min_p = 1.0;
  for (int L : cfg.grid) {
    PcrConfig pc;
    pc.L = L;
    pc.K = cfg.shared_counterfeits ? positions / L : cfg.K;
    pc.alpha = cfg.alpha;
    pc.threshold_kind = cfg.p_kind;
    PcrResult r;
    if (cfg.shared_counterfeits) {
      r = summarize_counts(count_labels(shared_ranks, pc.K, L), pc);
    } else {
      r = run_pcr_with_prefix(data, sampler, score, pc, seed, static_cast<std::uint64_t>(L));
    }
    const double p = cfg.p_kind == ThresholdKind::finite ? r.p_finite : r.p_asym;
    res.per_l.push_back({L, r.statistic, p});
    min_p = std::min(min_p, p);
  }
  res.p_star = std::min(1.0, static_cast<double>(cfg.grid.size()) * min_p);
  res.reject = res.p_star <= cfg.alpha;
  return res;
}

}  // namespace pcr
