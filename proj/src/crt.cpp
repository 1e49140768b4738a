#include "pcr/crt.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pcr/errors.hpp"
#include "pcr/parallel.hpp"

namespace pcr {

SummedSampleScore::SummedSampleScore(std::shared_ptr<const ScoreFunction> per_sample)
    : per_sample_(std::move(per_sample)) {
  if (!per_sample_) throw std::invalid_argument("SummedSampleScore: null score");
}

double SummedSampleScore::score(const Dataset& data, std::span<const double> x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += per_sample_->score(x[i], data.y[i], data.z_row(i));
  return total;
}

std::string SummedSampleScore::descriptor() const { return "sum(" + per_sample_->descriptor() + ")"; }

CrtPValue crt_p(double original_dataset_score, std::span<const double> counterfeit_dataset_scores) {
  if (counterfeit_dataset_scores.empty()) throw std::domain_error("crt_p: no counterfeits");
  std::uint64_t below = 0;
  for (double c : counterfeit_dataset_scores) below += original_dataset_score >= c ? 1 : 0;
  return {1 + below, counterfeit_dataset_scores.size() + 1};
}

bool crt_decide(CrtPValue p, double alpha, Sidedness sided) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("crt_decide: alpha must lie in (0, 1)");
  // Compare integers against alpha * den. The upper tail uses the mirrored
  // rank (den - num + 1) / den, which is exactly uniform under the null too.
  const long double cut = static_cast<long double>(alpha) * p.den;
  const auto num = static_cast<long double>(p.num);
  const auto upper = static_cast<long double>(p.den - p.num + 1);
  switch (sided) {
    case Sidedness::one_lower:
      return num <= cut;
    case Sidedness::one_upper:
      return upper <= cut;
    case Sidedness::two:
      return 2 * num <= cut || 2 * upper <= cut;
  }
  return false;
}

CrtResult run_crt(const Dataset& data, const ConditionalSampler& sampler, const DatasetScore& score, int M,
                  double alpha, std::uint64_t seed) {
  if (M < 1) throw std::domain_error("run_crt: M must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("run_crt: alpha must lie in (0, 1)");
  data.validate();
  const std::size_t n = data.size();

  CrtResult res;
  res.M = M;
  res.alpha = alpha;
  res.seed = seed;
  res.original_score = score.score(data, data.x);
  if (!std::isfinite(res.original_score)) throw DataError("non-finite dataset score");

  std::vector<double> scores(static_cast<std::size_t>(M));
  parallel_for(scores.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> xs(n);
    for (std::size_t j = begin; j < end; ++j) {
      RngStream rng(seed, stream_key({kCrtStreamTag, j}));
      for (std::size_t i = 0; i < n; ++i) {
        try {
          xs[i] = sampler.draw(data.z_row(i), rng);
        } catch (const DataError& e) {
          if (e.index() != DataError::kNoIndex) throw;
          throw DataError(e.what(), i);
        } catch (const NumericalError&) {
          throw;
        } catch (const std::exception& e) {
          throw DataError(e.what(), i);
        }
      }
      scores[j] = score.score(data, xs);
      if (!std::isfinite(scores[j])) throw DataError("non-finite counterfeit dataset score");
    }
  });

  res.p = crt_p(res.original_score, scores);
  res.reject_one_lower = crt_decide(res.p, alpha, Sidedness::one_lower);
  res.reject_one_upper = crt_decide(res.p, alpha, Sidedness::one_upper);
  res.reject_two = crt_decide(res.p, alpha, Sidedness::two);
  return res;
}

}  // namespace pcr
