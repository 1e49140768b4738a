#include "pcr/core.hpp"

#include <cmath>
#include <stdexcept>

#include "pcr/errors.hpp"
#include "pcr/parallel.hpp"

namespace pcr {

std::string to_string(ThresholdKind kind) { return kind == ThresholdKind::finite ? "finite" : "asym"; }

ThresholdKind parse_threshold_kind(const std::string& s) {
  if (s == "finite") return ThresholdKind::finite;
  if (s == "asym") return ThresholdKind::asym;
  throw std::invalid_argument("threshold must be 'finite' or 'asym', got '" + s + "'");
}

void PcrConfig::validate() const {
  if (L < 2) throw std::domain_error("L must be at least 2");
  if (K < 1) throw std::domain_error("K must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0, 1)");
}

int rank_among_counterfeits(double original, std::span<const double> counterfeits) {
  if (counterfeits.empty()) throw std::domain_error("rank_among_counterfeits: no counterfeits");
  int below = 0;
  for (double c : counterfeits) below += (original >= c) ? 1 : 0;
  return 1 + below;
}

int rank_among_counterfeits(double original, std::span<const double> counterfeits, RngStream& rng) {
  if (counterfeits.empty()) throw std::domain_error("rank_among_counterfeits: no counterfeits");
  int below = 0;
  int ties = 0;
  for (double c : counterfeits) {
    below += (original > c) ? 1 : 0;
    ties += (original == c) ? 1 : 0;
  }
  const int offset = ties == 0 ? 0 : static_cast<int>(rng.below(static_cast<std::uint64_t>(ties) + 1));
  return 1 + below + offset;
}

int assign_label(int rank, int K, int L) {
  if (K < 1 || L < 1) throw std::domain_error("assign_label: K and L must be positive");
  if (rank < 1 || rank > K * L) throw std::domain_error("assign_label: rank out of range");
  return (rank + K - 1) / K;
}

double pcr_statistic(const LabelCounts& counts, int L) {
  if (counts.n == 0) throw std::domain_error("pcr_statistic: no samples");
  if (static_cast<int>(counts.w.size()) != L) throw std::domain_error("pcr_statistic: counts size differs from L");
  const double n = static_cast<double>(counts.n);
  const double expected = n / L;
  double ss = 0.0;
  for (std::uint64_t w : counts.w) {
    const double d = static_cast<double>(w) - expected;
    ss += d * d;
  }
  return static_cast<double>(L) / n * ss;
}

double threshold(ThresholdKind kind, int L, double alpha) {
  if (L < 2) throw std::domain_error("threshold: L must be at least 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("threshold: alpha must lie in (0, 1)");
  if (kind == ThresholdKind::finite) return L + std::sqrt(2.0 * L / alpha);
  return chi2_quantile(1.0 - alpha, {static_cast<double>(L - 1), 0.0});
}

double p_value_finite(double U, int L) {
  if (U <= L) return 1.0;
  const double gap = U - L;
  return std::min(2.0 * L / (gap * gap), 1.0);
}

double p_value_asym(double U, int L) {
  if (L < 2) throw std::domain_error("p_value_asym: L must be at least 2");
  return 1.0 - chi2_cdf(U, {static_cast<double>(L - 1), 0.0});
}

std::vector<int> pcr_ranks(const Dataset& data, const ConditionalSampler& sampler, const ScoreFunction& score,
                           int M, TieRule ties, std::uint64_t seed, std::uint64_t prefix) {
  if (M < 1) throw std::domain_error("pcr_ranks: M must be at least 1");
  const std::size_t n = data.size();
  std::vector<int> ranks(n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> xs(static_cast<std::size_t>(M));
    std::vector<double> scores(static_cast<std::size_t>(M));
    for (std::size_t j = begin; j < end; ++j) {
      const auto z = data.z_row(j);
      RngStream rng(seed, stream_key({prefix, j}));
      double original = 0.0;
      try {
        sampler.draw_many(z, rng, xs);
        score.score_many(xs, data.y[j], z, scores);
        original = score.score(data.x[j], data.y[j], z);
      } catch (const DataError& e) {
        if (e.index() != DataError::kNoIndex) throw;
        throw DataError(e.what(), j);
      } catch (const NumericalError&) {
        throw;
      } catch (const std::exception& e) {
        throw DataError(e.what(), j);
      }
      if (!std::isfinite(original)) throw DataError("non-finite score", j);
      for (double s : scores) {
        if (!std::isfinite(s)) throw DataError("non-finite counterfeit score", j);
      }
      ranks[j] = ties == TieRule::literal ? rank_among_counterfeits(original, scores)
                                          : rank_among_counterfeits(original, scores, rng);
    }
  });
  return ranks;
}

LabelCounts count_labels(std::span<const int> ranks, int K, int L) {
  LabelCounts counts;
  counts.w.assign(static_cast<std::size_t>(L), 0);
  counts.n = ranks.size();
  for (int r : ranks) ++counts.w[static_cast<std::size_t>(assign_label(r, K, L) - 1)];
  return counts;
}

PcrResult summarize_counts(LabelCounts counts, const PcrConfig& cfg) {
  cfg.validate();
  PcrResult res;
  res.L = cfg.L;
  res.K = cfg.K;
  res.alpha = cfg.alpha;
  res.threshold_kind = cfg.threshold_kind;
  res.statistic = pcr_statistic(counts, cfg.L);
  res.threshold = threshold(cfg.threshold_kind, cfg.L, cfg.alpha);
  res.p_finite = p_value_finite(res.statistic, cfg.L);
  res.p_asym = p_value_asym(res.statistic, cfg.L);
  res.reject = res.statistic >= res.threshold;
  res.counts = std::move(counts);
  return res;
}

PcrResult run_pcr_with_prefix(const Dataset& data, const ConditionalSampler& sampler, const ScoreFunction& score,
                              const PcrConfig& cfg, std::uint64_t seed, std::uint64_t prefix) {
  cfg.validate();
  data.validate();
  auto ranks = pcr_ranks(data, sampler, score, cfg.M(), cfg.ties, seed, prefix);
  PcrResult res = summarize_counts(count_labels(ranks, cfg.K, cfg.L), cfg);
  res.ranks = std::move(ranks);
  res.seed = seed;
  return res;
}

PcrResult run_pcr(const Dataset& data, const ConditionalSampler& sampler, const ScoreFunction& score,
                  const PcrConfig& cfg, std::uint64_t seed) {
  return run_pcr_with_prefix(data, sampler, score, cfg, seed, 0);
}

}  // namespace pcr
