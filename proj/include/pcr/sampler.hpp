#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pcr/randkit.hpp"

namespace pcr {

// Model-X access: draws X from its conditional law given Z = z.
class ConditionalSampler {
 public:
  virtual ~ConditionalSampler() = default;

  virtual double draw(std::span<const double> z, RngStream& rng) const = 0;
  // Fills `out` with independent draws at the same z.
  virtual void draw_many(std::span<const double> z, RngStream& rng, std::span<double> out) const;
  virtual std::string descriptor() const = 0;
};

// X | Z = z ~ N(intercept + v'z, sd^2). An empty v means X ~ N(intercept, sd^2).
class GaussianLinearSampler final : public ConditionalSampler {
 public:
  explicit GaussianLinearSampler(std::vector<double> v, double sd = 1.0, double intercept = 0.0);

  double mean(std::span<const double> z) const;
  double sd() const noexcept { return sd_; }
  const std::vector<double>& coefficients() const noexcept { return v_; }

  double draw(std::span<const double> z, RngStream& rng) const override;
  void draw_many(std::span<const double> z, RngStream& rng, std::span<double> out) const override;
  std::string descriptor() const override;

 private:
  std::vector<double> v_;
  double sd_;
  double intercept_;
};

struct Dataset;

// X | Z ~ N(b0 + v'z, s^2) fitted by least squares on the data itself. Not a
// model-X sampler in the strict sense; offered as a convenience default.
std::shared_ptr<GaussianLinearSampler> fit_gaussian_linear(const Dataset& data);

// Parses `gaussian-linear:<coef file>[:sd]`. The coefficient file holds numbers
// separated by commas or newlines (an optional non-numeric first line is skipped).
std::shared_ptr<ConditionalSampler> sampler_from_spec(const std::string& spec);

}  // namespace pcr
