#pragma once

#include <memory>
#include <span>
#include <string>

namespace pcr {

// Per-sample score T(x, y, z).
class ScoreFunction {
 public:
  virtual ~ScoreFunction() = default;

  virtual double score(double x, double y, std::span<const double> z) const = 0;
  // Scores several x values sharing the same (y, z).
  virtual void score_many(std::span<const double> xs, double y, std::span<const double> z,
                          std::span<double> out) const;
  virtual std::string descriptor() const = 0;
};

// (y - x - sum(z))^2
class ResidualLinearZ1Score final : public ScoreFunction {
 public:
  double score(double x, double y, std::span<const double> z) const override;
  void score_many(std::span<const double> xs, double y, std::span<const double> z,
                  std::span<double> out) const override;
  std::string descriptor() const override { return "residual_linear_z1"; }
};

// (y - x)^2
class SquaredLossScore final : public ScoreFunction {
 public:
  double score(double x, double y, std::span<const double> z) const override;
  std::string descriptor() const override { return "sq_loss_xy"; }
};

// (y - b0 - b1 x)^2
class OlsResidualScore final : public ScoreFunction {
 public:
  OlsResidualScore(double b0, double b1) : b0_(b0), b1_(b1) {}
  double score(double x, double y, std::span<const double> z) const override;
  std::string descriptor() const override;
  double b0() const noexcept { return b0_; }
  double b1() const noexcept { return b1_; }

 private:
  double b0_;
  double b1_;
};

// Built-in scores by name: residual_linear_z1, sq_loss_xy, ols_residual (uses b0, b1).
std::shared_ptr<ScoreFunction> score_builtin(const std::string& name, double b0 = 0.0, double b1 = 0.0);

// CLI form: a built-in name, or `ols_residual:<b0>:<b1>`.
std::shared_ptr<ScoreFunction> score_from_spec(const std::string& spec);

}  // namespace pcr
