#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "pcr/dataset.hpp"
#include "pcr/sampler.hpp"
#include "pcr/score.hpp"

namespace pcr {

enum class Sidedness { one_lower, one_upper, two };

// Exact rational p-value num / den with den = M + 1.
struct CrtPValue {
  std::uint64_t num = 1;
  std::uint64_t den = 1;
  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
};

struct CrtResult {
  CrtPValue p;
  int M = 0;
  double alpha = 0.0;
  double original_score = 0.0;
  bool reject_one_lower = false;
  bool reject_one_upper = false;
  bool reject_two = false;
  std::uint64_t seed = 0;
};

// Scores a whole dataset with its x column replaced by `x`.
class DatasetScore {
 public:
  virtual ~DatasetScore() = default;
  virtual double score(const Dataset& data, std::span<const double> x) const = 0;
  virtual std::string descriptor() const = 0;
};

// sum_i T(x_i, y_i, z_i)
class SummedSampleScore final : public DatasetScore {
 public:
  explicit SummedSampleScore(std::shared_ptr<const ScoreFunction> per_sample);
  double score(const Dataset& data, std::span<const double> x) const override;
  std::string descriptor() const override;

 private:
  std::shared_ptr<const ScoreFunction> per_sample_;
};

// (1 + #{j : original >= counterfeit_j}) / (M + 1)
CrtPValue crt_p(double original_dataset_score, std::span<const double> counterfeit_dataset_scores);

// one_lower: p <= alpha. one_upper: (den - num + 1) / den <= alpha.
// two: either tail at alpha / 2.
bool crt_decide(CrtPValue p, double alpha, Sidedness sided);

// Counterfeit dataset j redraws every x_i from stream (seed, stream_key({kCrtStreamTag, j})).
inline constexpr std::uint64_t kCrtStreamTag = 0x435254;

CrtResult run_crt(const Dataset& data, const ConditionalSampler& sampler, const DatasetScore& score, int M,
                  double alpha, std::uint64_t seed);

}  // namespace pcr
