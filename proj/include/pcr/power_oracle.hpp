#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcr/randkit.hpp"

namespace pcr {

// One (z, y) location with a quadrature weight (1 for plain Monte Carlo draws).
struct ZyPoint {
  std::vector<double> z;
  double y = 0.0;
  double weight = 1.0;
};

// The two conditional laws of the score at a fixed (z, y):
// F_{T|ZY}(t) for the true X and F_{T|Z}(t) for a counterfeit.
class ScoreLaws {
 public:
  virtual ~ScoreLaws() = default;
  virtual double cdf_given_zy(double t) const = 0;
  virtual double cdf_given_z(double t) const = 0;
  // Default: exponential bracket on [0, t_hi] then bisection to 1e-12 in t.
  virtual double quantile_given_z(double u) const;
};

class OdcModel {
 public:
  virtual ~OdcModel() = default;

  virtual ZyPoint sample_zy(RngStream& rng) const = 0;
  virtual std::unique_ptr<ScoreLaws> laws(const ZyPoint& point) const = 0;
  virtual std::string descriptor() const = 0;

  double cdf_t_given_zy(double t, const ZyPoint& point) const { return laws(point)->cdf_given_zy(t); }
  double cdf_t_given_z(double t, const ZyPoint& point) const { return laws(point)->cdf_given_z(t); }

  // R_T at each u by deterministic quadrature; empty if the model has none.
  virtual std::vector<double> odc_by_quadrature(std::span<const double> us) const;
};

// Z ~ N(0, I_p), X | Z ~ N(v'Z, 1), Y = (u'Z)^2 + a X + eps, score (y - x - sum z)^2.
// Counterfeits are drawn from N(v'Z, counterfeit_sd^2).
class QuadraticOdcModel final : public OdcModel {
 public:
  QuadraticOdcModel(std::vector<double> u, std::vector<double> v, double a, double counterfeit_sd = 1.0);

  ZyPoint sample_zy(RngStream& rng) const override;
  std::unique_ptr<ScoreLaws> laws(const ZyPoint& point) const override;
  std::string descriptor() const override;
  // Exact for counterfeit_sd == 1; throws std::domain_error otherwise.
  std::vector<double> odc_by_quadrature(std::span<const double> us) const override;

 private:
  double smoothed_cdf(double beta) const;
  void build_table() const;

  std::vector<double> u_;
  std::vector<double> v_;
  double a_;
  double counterfeit_sd_;
  double quad_a_ = 0.0;  // d0(zeta) = quad_a zeta^2 + quad_b zeta
  double quad_b_ = 0.0;
  double smooth_sd_ = 0.0;
  mutable std::once_flag table_once_;
  mutable std::vector<double> table_beta_;
  mutable std::vector<double> table_g_;
  mutable std::vector<double> table_dg_;
};

// X ~ N(0,1), Y = 1/sqrt(theta^2 + X^2) + eps, no Z, score (y - x)^2.
class CrtFailureOdcModel final : public OdcModel {
 public:
  explicit CrtFailureOdcModel(double theta);

  ZyPoint sample_zy(RngStream& rng) const override;
  std::unique_ptr<ScoreLaws> laws(const ZyPoint& point) const override;
  std::string descriptor() const override;
  std::vector<double> odc_by_quadrature(std::span<const double> us) const override;

  double g(double x) const { return 1.0 / std::sqrt(theta_ * theta_ + x * x); }

 private:
  double theta_;
};

struct OdcCurve {
  std::vector<double> grid;
  std::vector<double> R;
  std::vector<double> r;
  double lipschitz_C = 0.0;
  double bound_B = 0.0;
};

// Interior grid i / cells, i = 1 .. cells - 1.
std::vector<double> default_odc_grid(int cells = 1024);

// Builds r, B and C from R on the grid (central differences, one-sided at the ends).
OdcCurve make_odc_curve(std::vector<double> grid, std::vector<double> R);

// Monte Carlo over zy_samples draws of (Z, Y) from stream (seed, ...), shared by every u.
OdcCurve conditional_odc(const OdcModel& model, std::span<const double> grid, std::size_t zy_samples,
                         std::uint64_t seed);
// Same estimator over a caller-supplied weighted point set.
OdcCurve conditional_odc(const OdcModel& model, std::span<const double> grid, std::span<const ZyPoint> points);
// Uses the model's deterministic quadrature.
OdcCurve conditional_odc_quadrature(const OdcModel& model, std::span<const double> grid);

// Trapezoid rule for the integral of |r - 1| on [0, 1]; r is held constant outside the grid.
double dependency_power(const OdcCurve& curve);

struct LabelProbabilities {
  std::vector<double> p;
  double sum_error = 0.0;  // sum p - 1, reported rather than renormalized
};

// Probability that a sample receives each label, by quadrature against the
// linearly interpolated relative density.
LabelProbabilities label_probabilities(const OdcCurve& curve, int K, int L);

double nu_K(double B, double C, int K);

struct PowerPredicates {
  bool finite_ok = false;
  bool asym_ok = false;
  double rhs_finite = 0.0;
  double rhs_asym = 0.0;
  double nu_K = 0.0;
};

// Evaluates the sufficient conditions for power 1 - beta under the finite and
// asymptotic thresholds. Throws std::domain_error unless nu_K < 1.
PowerPredicates power_lower_bound_predicates(double delta_T, double n, int L, int K, double alpha, double beta,
                                             double B, double C);

// Noncentrality n L sum (p_l - 1/L)^2 and the resulting chi-squared power.
double noncentrality(std::span<const double> p, double n);
double predicted_power_asym(std::span<const double> p, double n, int L, double alpha);

struct PowerReport {
  double delta_T = 0.0;
  std::vector<double> p_s;
  double sum_error = 0.0;
  double l1_gap = 0.0;
  double nu_K = 0.0;
  double lower_bound_finite = 0.0;
  double lower_bound_asym = 0.0;
  bool finite_ok = false;
  bool asym_ok = false;
  double predicted_power_asym = 0.0;
  double B = 0.0;
  double C = 0.0;
  std::optional<double> eta;  // filled in for CRT-failure models
};

PowerReport power_report(const OdcCurve& curve, double n, int L, int K, double alpha, double beta);

struct GaussianExpectation {
  double value = 0.0;
  double error = 0.0;
};

// E[f(Z)] for Z ~ N(0,1) by exp-sinh quadrature on each half-line.
// `budget` is the number of refinement levels (1..20); throws NumericalError
// if the error estimate is still above tolerance when they are used up.
GaussianExpectation gaussian_expectation(const std::function<double(double)>& f, int budget = 10,
                                         double tolerance = 1e-12);

struct CrtEta {
  double eta = 1.0;
  double e_g2 = 0.0;    // E[g(X)^2]
  double e_x2g2 = 0.0;  // E[X^2 g(X)^2]
  double e_g = 0.0;     // E[g(X)]
  double e_x2g = 0.0;   // E[X^2 g(X)]
  double e_phi2 = 0.25; // E[Phi(eta Z)^2]
};

CrtEta crt_eta(const std::function<double(double)>& g, int budget = 10);

// Limiting bound on P(|p - 1/2| >= delta) for the CRT p statistic; requires M > 1/delta.
double crt_concentration_bound(double delta, int M, const CrtEta& eta);

}  // namespace pcr
