#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcr/dataset.hpp"
#include "pcr/randkit.hpp"
#include "pcr/sampler.hpp"
#include "pcr/score.hpp"

namespace pcr {

enum class ThresholdKind { finite, asym };
enum class TieRule { literal, random };

std::string to_string(ThresholdKind kind);
ThresholdKind parse_threshold_kind(const std::string& s);

struct PcrConfig {
  int L = 5;
  int K = 4;
  double alpha = 0.1;
  ThresholdKind threshold_kind = ThresholdKind::asym;
  TieRule ties = TieRule::literal;

  int M() const noexcept { return K * L - 1; }
  // Throws std::domain_error unless L >= 2, K >= 1 and 0 < alpha < 1.
  void validate() const;
};

struct LabelCounts {
  std::vector<std::uint64_t> w;
  std::uint64_t n = 0;
};

struct PcrResult {
  LabelCounts counts;
  int L = 0;
  int K = 0;
  double alpha = 0.0;
  ThresholdKind threshold_kind = ThresholdKind::asym;
  double statistic = 0.0;
  double threshold = 0.0;
  double p_finite = 1.0;
  double p_asym = 1.0;
  bool reject = false;
  std::vector<int> ranks;
  std::uint64_t seed = 0;
};

// 1 + #{counterfeits <= original}.
int rank_among_counterfeits(double original, std::span<const double> counterfeits);
// As above, but the original is placed uniformly at random among tied counterfeits.
int rank_among_counterfeits(double original, std::span<const double> counterfeits, RngStream& rng);

// ceil(rank / K), for 1 <= rank <= K*L.
int assign_label(int rank, int K, int L);

// (L/n) * sum_l (W_l - n/L)^2
double pcr_statistic(const LabelCounts& counts, int L);

double threshold(ThresholdKind kind, int L, double alpha);
double p_value_finite(double U, int L);
double p_value_asym(double U, int L);

// Ranks of every sample among M counterfeits. Sample j uses the stream
// (seed, stream_key({prefix, j})), so a row's counterfeits do not depend on
// the other rows or on the worker schedule.
std::vector<int> pcr_ranks(const Dataset& data, const ConditionalSampler& sampler, const ScoreFunction& score,
                           int M, TieRule ties, std::uint64_t seed, std::uint64_t prefix = 0);

LabelCounts count_labels(std::span<const int> ranks, int K, int L);

// Fills statistic, threshold, p-values and decision from label counts.
PcrResult summarize_counts(LabelCounts counts, const PcrConfig& cfg);

PcrResult run_pcr(const Dataset& data, const ConditionalSampler& sampler, const ScoreFunction& score,
                  const PcrConfig& cfg, std::uint64_t seed);

// Same as run_pcr with an explicit per-sample stream prefix.
PcrResult run_pcr_with_prefix(const Dataset& data, const ConditionalSampler& sampler, const ScoreFunction& score,
                              const PcrConfig& cfg, std::uint64_t seed, std::uint64_t prefix);

}  // namespace pcr
