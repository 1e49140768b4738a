#pragma once

#include <cstdint>
#include <vector>

#include "pcr/core.hpp"

namespace pcr {

struct PfConfig {
  std::vector<int> grid = {2, 4, 8, 16, 32};
  int K = 100;
  double alpha = 0.1;
  ThresholdKind p_kind = ThresholdKind::asym;
  // Reuse one set of ranks with K * max(grid) positions for every L.
  // Requires every L to divide K * max(grid). Not covered by the Bonferroni guarantee.
  bool shared_counterfeits = false;

  void validate() const;
};

struct PfEntry {
  int L = 0;
  double U = 0.0;
  double p = 1.0;
};

struct PfResult {
  std::vector<int> grid;
  std::vector<PfEntry> per_l;
  double p_star = 1.0;
  bool reject = false;
  double alpha = 0.0;
  int K = 0;
  ThresholdKind p_kind = ThresholdKind::asym;
  std::uint64_t seed = 0;
};

// Runs the PCR test once per grid value L (per-sample streams use prefix L, so
// the result does not depend on grid order) and combines with Bonferroni:
// p_star = min(1, N * min_i p_i).
PfResult run_parameter_free(const Dataset& data, const ConditionalSampler& sampler, const ScoreFunction& score,
                            const PfConfig& cfg, std::uint64_t seed);

}  // namespace pcr
