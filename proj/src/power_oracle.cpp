#include "pcr/power_oracle.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "pcr/core.hpp"
#include "pcr/csv.hpp"
#include "pcr/errors.hpp"
#include "pcr/parallel.hpp"

namespace pcr {

namespace {

constexpr std::uint64_t kOdcStreamTag = 0x4F4443;
constexpr double kInf = std::numeric_limits<double>::infinity();

// 8-point Gauss-Legendre on [-1, 1].
constexpr double kGlNodes[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                                0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr double kGlWeights[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                                  0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

double upper_tail(double x) { return 0.5 * std::erfc(x * M_SQRT1_2); }

// P(lo <= N(0,1) <= hi) without cancellation in either tail.
double normal_interval(double lo, double hi) {
  if (hi <= lo) return 0.0;
  if (lo >= 0.0) return upper_tail(lo) - upper_tail(hi);
  if (hi <= 0.0) return upper_tail(-hi) - upper_tail(-lo);
  return 1.0 - upper_tail(-lo) - upper_tail(hi);
}

// Solves P(|c - sigma N| <= r) = u for r >= 0 by safeguarded Newton.
double folded_radius(double c, double sigma, double u) {
  auto f = [&](double r) { return normal_interval((c - r) / sigma, (c + r) / sigma) - u; };
  double lo = 0.0;
  double hi = std::fabs(c) + sigma;
  while (f(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericalError("folded_radius: bracket expansion failed");
  }
  double r = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double v = f(r);
    if (v < 0.0) {
      lo = r;
    } else {
      hi = r;
    }
    const double slope = (normal_pdf((c + r) / sigma) + normal_pdf((c - r) / sigma)) / sigma;
    double next = slope > 0.0 ? r - v / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - r) <= 1e-14 * std::max(1.0, r) || hi - lo <= 1e-14 * std::max(1.0, hi)) return next;
    r = next;
  }
  return r;
}

class GaussianScoreLaws final : public ScoreLaws {
 public:
  // Score (c - xi)^2 with xi ~ N(mu_zy, sd_zy^2) for the true X and N(0, sd_z^2) for counterfeits.
  GaussianScoreLaws(double c, double mu_zy, double sd_zy, double sd_z)
      : c_(c), mu_zy_(mu_zy), sd_zy_(sd_zy), sd_z_(sd_z) {}

  double cdf_given_zy(double t) const override {
    if (t <= 0.0) return 0.0;
    const double r = std::sqrt(t);
    return normal_interval((c_ - r - mu_zy_) / sd_zy_, (c_ + r - mu_zy_) / sd_zy_);
  }
  double cdf_given_z(double t) const override {
    if (t <= 0.0) return 0.0;
    const double r = std::sqrt(t);
    return normal_interval((c_ - r) / sd_z_, (c_ + r) / sd_z_);
  }
  double quantile_given_z(double u) const override {
    const double r = folded_radius(c_, sd_z_, u);
    return r * r;
  }

 private:
  double c_;
  double mu_zy_;
  double sd_zy_;
  double sd_z_;
};

// Posterior of X given Y = y under X ~ N(0,1), Y = g(X) + eps, tabulated as a CDF.
class CrtPosteriorLaws final : public ScoreLaws {
 public:
  CrtPosteriorLaws(double y, double theta) : y_(y) {
    const double span = std::asinh(12.0 / theta);
    constexpr int kNodes = 4096;
    std::vector<double> xs;
    xs.reserve(kNodes + 4000);
    for (int i = 0; i <= kNodes; ++i) xs.push_back(theta * std::sinh(-span + 2.0 * span * i / kNodes));
    // Extra resolution where g(x) is within a few noise widths of y.
    const double v_top = 1.0 / theta;
    const double v_lo = std::max(y - 8.0, 1.0 / std::sqrt(theta * theta + 144.0));
    const double v_hi = std::min(y + 8.0, v_top);
    for (double v = v_lo; v < v_hi; v += 0.01) {
      const double x = std::sqrt(std::max(0.0, 1.0 / (v * v) - theta * theta));
      xs.push_back(x);
      xs.push_back(-x);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

    std::vector<double> logd(xs.size());
    double top = -kInf;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double e = y - 1.0 / std::sqrt(theta * theta + xs[i] * xs[i]);
      logd[i] = -0.5 * xs[i] * xs[i] - 0.5 * e * e;
      top = std::max(top, logd[i]);
    }
    x_ = xs;
    cdf_.assign(xs.size(), 0.0);
    double prev = std::exp(logd[0] - top);
    for (std::size_t i = 1; i < xs.size(); ++i) {
      const double cur = std::exp(logd[i] - top);
      cdf_[i] = cdf_[i - 1] + 0.5 * (prev + cur) * (xs[i] - xs[i - 1]);
      prev = cur;
    }
    const double total = cdf_.back();
    if (!(total > 0.0)) throw NumericalError("posterior table has no mass at y=" + std::to_string(y));
    for (double& c : cdf_) c /= total;
  }

  double cdf_given_zy(double t) const override {
    if (t <= 0.0) return 0.0;
    const double r = std::sqrt(t);
    return std::max(0.0, posterior_cdf(y_ + r) - posterior_cdf(y_ - r));
  }
  double cdf_given_z(double t) const override {
    if (t <= 0.0) return 0.0;
    const double r = std::sqrt(t);
    return normal_interval(y_ - r, y_ + r);
  }
  double quantile_given_z(double u) const override {
    const double r = folded_radius(y_, 1.0, u);
    return r * r;
  }

 private:
  double posterior_cdf(double x) const {
    if (x <= x_.front()) return 0.0;
    if (x >= x_.back()) return 1.0;
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin());
    const double w = (x - x_[i - 1]) / (x_[i] - x_[i - 1]);
    return cdf_[i - 1] + w * (cdf_[i] - cdf_[i - 1]);
  }

  double y_;
  std::vector<double> x_;
  std::vector<double> cdf_;
};

// Integral over p in (0, 1) of h(p, xi = Phi^{-1}(p)), split at the given breakpoints.
template <typename H>
double integrate_probability(H&& h, std::vector<double> breaks) {
  breaks.push_back(0.0);
  breaks.push_back(1.0);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto f = [&](double p) {
    if (!(p > 0.0 && p < 1.0)) return 0.0;
    const double xi = normal_quantile(p);
    if (!std::isfinite(xi)) return 0.0;
    return h(p, xi);
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (breaks[i + 1] - breaks[i] <= 0.0) continue;
    total += integrator.integrate(f, breaks[i], breaks[i + 1], 1e-12);
  }
  return total;
}

}  // namespace

double ScoreLaws::quantile_given_z(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("quantile_given_z: u must lie in (0, 1)");
  double lo = 0.0;
  double hi = 1.0;
  int expansions = 0;
  while (cdf_given_z(hi) < u) {
    lo = hi;
    hi *= 2.0;
    if (++expansions > 1000) throw NumericalError("quantile_given_z: bracket expansion failed at u=" + std::to_string(u));
  }
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (cdf_given_z(mid) < u) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> OdcModel::odc_by_quadrature(std::span<const double>) const { return {}; }

QuadraticOdcModel::QuadraticOdcModel(std::vector<double> u, std::vector<double> v, double a, double counterfeit_sd)
    : u_(std::move(u)), v_(std::move(v)), a_(a), counterfeit_sd_(counterfeit_sd) {
  if (u_.size() != v_.size()) throw std::domain_error("QuadraticOdcModel: u and v differ in length");
  if (!(counterfeit_sd_ > 0.0)) throw std::domain_error("QuadraticOdcModel: counterfeit_sd must be positive");
  // d(z) = (u'z)^2 + w'z with w = (a - 1) v - 1, reduced to two independent normals.
  double uu = 0.0;
  for (double c : u_) uu += c * c;
  std::vector<double> w(v_.size());
  for (std::size_t k = 0; k < v_.size(); ++k) w[k] = (a_ - 1.0) * v_[k] - 1.0;
  double ww = 0.0;
  for (double c : w) ww += c * c;
  double wu = 0.0;
  if (uu > 0.0) {
    for (std::size_t k = 0; k < w.size(); ++k) wu += w[k] * u_[k];
    wu /= std::sqrt(uu);
  }
  quad_a_ = uu;
  quad_b_ = wu;
  const double w_perp2 = std::max(0.0, ww - wu * wu);
  smooth_sd_ = 2.0 * std::sqrt(1.0 + w_perp2);
}

ZyPoint QuadraticOdcModel::sample_zy(RngStream& rng) const {
  ZyPoint pt;
  pt.z.resize(u_.size());
  double uz = 0.0;
  double vz = 0.0;
  for (std::size_t k = 0; k < u_.size(); ++k) {
    pt.z[k] = rng.normal();
    uz += u_[k] * pt.z[k];
    vz += v_[k] * pt.z[k];
  }
  const double x = vz + rng.normal();
  pt.y = uz * uz + a_ * x + rng.normal();
  return pt;
}

std::unique_ptr<ScoreLaws> QuadraticOdcModel::laws(const ZyPoint& pt) const {
  if (pt.z.size() != u_.size()) throw DataError("QuadraticOdcModel: z has the wrong dimension");
  double uz = 0.0;
  double m = 0.0;
  double sz = 0.0;
  for (std::size_t k = 0; k < u_.size(); ++k) {
    uz += u_[k] * pt.z[k];
    m += v_[k] * pt.z[k];
    sz += pt.z[k];
  }
  const double c = pt.y - sz - m;
  const double e = pt.y - uz * uz - a_ * m;
  const double denom = 1.0 + a_ * a_;
  return std::make_unique<GaussianScoreLaws>(c, a_ * e / denom, 1.0 / std::sqrt(denom), counterfeit_sd_);
}

std::string QuadraticOdcModel::descriptor() const {
  std::ostringstream os;
  os << "quadratic(p=" << u_.size() << ",a=" << format_double(a_) << ",counterfeit_sd=" << format_double(counterfeit_sd_)
     << ")";
  return os.str();
}

void QuadraticOdcModel::build_table() const {
  // G(beta) = E_zeta[Phi((beta - 2 d0(zeta)) / s)] on a uniform beta grid,
  // with G' stored for cubic Hermite interpolation.
  const double s = smooth_sd_;
  const double zmax = 8.5;
  std::vector<double> nodes;
  std::vector<double> weights;
  double zeta = -zmax;
  while (zeta < zmax) {
    const double slope = std::fabs(4.0 * quad_a_ * zeta) + 2.0 * std::fabs(quad_b_);
    const double h = std::min({0.05, 0.5 * s / (slope + 1e-300), zmax - zeta});
    for (int k = 0; k < 8; ++k) {
      const double x = zeta + 0.5 * h * (kGlNodes[k] + 1.0);
      nodes.push_back(2.0 * (quad_a_ * x * x + quad_b_ * x));
      weights.push_back(0.5 * h * kGlWeights[k] * normal_pdf(x));
    }
    zeta += h;
  }
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  for (double& w : weights) w /= wsum;

  const auto [dmin, dmax] = std::minmax_element(nodes.begin(), nodes.end());
  const double lo = *dmin - 40.0 * s;
  const double hi = *dmax + 40.0 * s;
  const double step = s / 24.0;
  const auto count = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
  table_beta_.resize(count);
  table_g_.assign(count, 0.0);
  table_dg_.assign(count, 0.0);

  // Sort nodes so each beta only touches the window where Phi is not saturated.
  std::vector<std::size_t> order(nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return nodes[x] < nodes[y]; });
  std::vector<double> sorted_nodes(nodes.size());
  std::vector<double> sorted_weights(nodes.size());
  std::vector<double> prefix(nodes.size() + 1, 0.0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted_nodes[i] = nodes[order[i]];
    sorted_weights[i] = weights[order[i]];
    prefix[i + 1] = prefix[i] + sorted_weights[i];
  }

  parallel_for(count, [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      const double beta = lo + step * static_cast<double>(b);
      table_beta_[b] = beta;
      // Nodes with 2 d0 < beta - 40 s contribute their full weight.
      const auto first = std::lower_bound(sorted_nodes.begin(), sorted_nodes.end(), beta - 40.0 * s);
      const auto last = std::upper_bound(sorted_nodes.begin(), sorted_nodes.end(), beta + 40.0 * s);
      const auto i0 = static_cast<std::size_t>(first - sorted_nodes.begin());
      const auto i1 = static_cast<std::size_t>(last - sorted_nodes.begin());
      double g = prefix[i0];
      double dg = 0.0;
      for (std::size_t i = i0; i < i1; ++i) {
        const double arg = (beta - sorted_nodes[i]) / s;
        g += sorted_weights[i] * (arg >= 0.0 ? 1.0 - upper_tail(arg) : upper_tail(-arg));
        dg += sorted_weights[i] * normal_pdf(arg) / s;
      }
      table_g_[b] = g;
      table_dg_[b] = dg;
    }
  });
}

double QuadraticOdcModel::smoothed_cdf(double beta) const {
  if (beta <= table_beta_.front()) return 0.0;
  if (beta >= table_beta_.back()) return 1.0;
  const double step = table_beta_[1] - table_beta_[0];
  const auto i = std::min(static_cast<std::size_t>((beta - table_beta_.front()) / step), table_beta_.size() - 2);
  const double h = table_beta_[i + 1] - table_beta_[i];
  const double t = (beta - table_beta_[i]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * table_g_[i] + (t3 - 2 * t2 + t) * h * table_dg_[i] +
         (-2 * t3 + 3 * t2) * table_g_[i + 1] + (t3 - t2) * h * table_dg_[i + 1];
}

std::vector<double> QuadraticOdcModel::odc_by_quadrature(std::span<const double> us) const {
  if (counterfeit_sd_ != 1.0) throw std::domain_error("odc_by_quadrature needs exact counterfeits (sd 1)");
  std::call_once(table_once_, [this] { build_table(); });
  const double kappa = 2.0 * a_ - 1.0;
  std::vector<double> R(us.size());
  parallel_for(us.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double u = us[i];
      auto h = [&](double p, double xi) {
        const double upper = p + u < 1.0 ? smoothed_cdf(normal_quantile(p + u) - kappa * xi) : 1.0;
        const double lower = p - u > 0.0 ? smoothed_cdf(normal_quantile(p - u) - kappa * xi) : 0.0;
        return upper - lower;
      };
      R[i] = integrate_probability(h, {u, 1.0 - u});
    }
  });
  return R;
}

CrtFailureOdcModel::CrtFailureOdcModel(double theta) : theta_(theta) {
  if (!(theta > 0.0)) throw std::domain_error("CrtFailureOdcModel: theta must be positive");
}

ZyPoint CrtFailureOdcModel::sample_zy(RngStream& rng) const {
  ZyPoint pt;
  const double x = rng.normal();
  pt.y = g(x) + rng.normal();
  return pt;
}

std::unique_ptr<ScoreLaws> CrtFailureOdcModel::laws(const ZyPoint& pt) const {
  return std::make_unique<CrtPosteriorLaws>(pt.y, theta_);
}

std::string CrtFailureOdcModel::descriptor() const { return "crt_failure(theta=" + format_double(theta_) + ")"; }

std::vector<double> CrtFailureOdcModel::odc_by_quadrature(std::span<const double> us) const {
  std::vector<double> R(us.size());
  parallel_for(us.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double u = us[i];
      // The event {F_{T|Z}(T) <= u} is an interval for the noise given x.
      auto h = [&](double p, double xi) {
        const double gx = g(xi);
        const double hi = p + u < 1.0 ? 0.5 * (xi + normal_quantile(p + u)) - gx : kInf;
        const double lo = p - u > 0.0 ? 0.5 * (xi + normal_quantile(p - u)) - gx : -kInf;
        return normal_interval(lo, hi);
      };
      R[i] = integrate_probability(h, {u, 1.0 - u, 0.5});
    }
  });
  return R;
}

std::vector<double> default_odc_grid(int cells) {
  if (cells < 2) throw std::domain_error("default_odc_grid: need at least 2 cells");
  std::vector<double> grid;
  for (int i = 1; i < cells; ++i) grid.push_back(static_cast<double>(i) / cells);
  return grid;
}

OdcCurve make_odc_curve(std::vector<double> grid, std::vector<double> R) {
  if (grid.size() != R.size() || grid.size() < 2) throw std::domain_error("make_odc_curve: need matching grids of size >= 2");
  OdcCurve c;
  const std::size_t m = grid.size();
  c.r.resize(m);
  c.r[0] = (R[1] - R[0]) / (grid[1] - grid[0]);
  c.r[m - 1] = (R[m - 1] - R[m - 2]) / (grid[m - 1] - grid[m - 2]);
  for (std::size_t i = 1; i + 1 < m; ++i) c.r[i] = (R[i + 1] - R[i - 1]) / (grid[i + 1] - grid[i - 1]);
  for (std::size_t i = 0; i < m; ++i) {
    c.bound_B = std::max(c.bound_B, std::fabs(c.r[i]));
    if (i + 1 < m) c.lipschitz_C = std::max(c.lipschitz_C, std::fabs(c.r[i + 1] - c.r[i]) / (grid[i + 1] - grid[i]));
  }
  c.grid = std::move(grid);
  c.R = std::move(R);
  return c;
}

OdcCurve conditional_odc(const OdcModel& model, std::span<const double> grid, std::span<const ZyPoint> points) {
  for (double u : grid) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("conditional_odc: grid must lie in (0, 1)");
  }
  if (points.empty()) throw std::domain_error("conditional_odc: no (z, y) points");
  constexpr std::size_t kBlock = 64;
  const std::size_t blocks = (points.size() + kBlock - 1) / kBlock;
  std::vector<std::vector<double>> partial(blocks, std::vector<double>(grid.size(), 0.0));
  std::vector<double> block_weight(blocks, 0.0);
  parallel_for(blocks, [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      for (std::size_t i = b * kBlock; i < std::min(points.size(), (b + 1) * kBlock); ++i) {
        const auto laws = model.laws(points[i]);
        for (std::size_t g = 0; g < grid.size(); ++g) {
          double t = 0.0;
          try {
            t = laws->quantile_given_z(grid[g]);
          } catch (const NumericalError& e) {
            std::ostringstream os;
            os << e.what() << " (u=" << grid[g] << ", y=" << points[i].y << ")";
            throw NumericalError(os.str());
          }
          partial[b][g] += points[i].weight * laws->cdf_given_zy(t);
        }
        block_weight[b] += points[i].weight;
      }
    }
  });
  std::vector<double> R(grid.size(), 0.0);
  double total_weight = 0.0;
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t g = 0; g < grid.size(); ++g) R[g] += partial[b][g];
    total_weight += block_weight[b];
  }
  for (double& v : R) v /= total_weight;
  return make_odc_curve(std::vector<double>(grid.begin(), grid.end()), std::move(R));
}

OdcCurve conditional_odc(const OdcModel& model, std::span<const double> grid, std::size_t zy_samples,
                         std::uint64_t seed) {
  if (zy_samples == 0) throw std::domain_error("conditional_odc: zy_samples must be positive");
  std::vector<ZyPoint> points(zy_samples);
  for (std::size_t i = 0; i < zy_samples; ++i) {
    RngStream rng(seed, stream_key({kOdcStreamTag, i}));
    points[i] = model.sample_zy(rng);
  }
  return conditional_odc(model, grid, points);
}

OdcCurve conditional_odc_quadrature(const OdcModel& model, std::span<const double> grid) {
  auto R = model.odc_by_quadrature(grid);
  if (R.size() != grid.size()) throw std::domain_error("model " + model.descriptor() + " has no quadrature rule");
  return make_odc_curve(std::vector<double>(grid.begin(), grid.end()), std::move(R));
}

double dependency_power(const OdcCurve& curve) {
  const auto& u = curve.grid;
  const auto& r = curve.r;
  if (u.empty()) return 0.0;
  double total = u.front() * std::fabs(r.front() - 1.0) + (1.0 - u.back()) * std::fabs(r.back() - 1.0);
  for (std::size_t i = 0; i + 1 < u.size(); ++i) {
    total += 0.5 * (u[i + 1] - u[i]) * (std::fabs(r[i] - 1.0) + std::fabs(r[i + 1] - 1.0));
  }
  return total;
}

LabelProbabilities label_probabilities(const OdcCurve& curve, int K, int L) {
  if (K < 1 || L < 1) throw std::domain_error("label_probabilities: K and L must be positive");
  if (curve.grid.empty()) throw std::domain_error("label_probabilities: empty curve");
  const int M = K * L - 1;
  constexpr int kPanels = 1024;
  std::vector<double> log_choose(static_cast<std::size_t>(M) + 1);
  for (int j = 0; j <= M; ++j) log_choose[j] = log_binomial(M, j);

  auto r_at = [&](double u) {
    const auto& g = curve.grid;
    if (u <= g.front()) return curve.r.front();
    if (u >= g.back()) return curve.r.back();
    const auto it = std::upper_bound(g.begin(), g.end(), u);
    const auto i = static_cast<std::size_t>(it - g.begin());
    const double w = (u - g[i - 1]) / (g[i] - g[i - 1]);
    return curve.r[i - 1] + w * (curve.r[i] - curve.r[i - 1]);
  };

  std::vector<std::vector<double>> partial(kPanels, std::vector<double>(static_cast<std::size_t>(L), 0.0));
  std::atomic<bool> bad{false};
  parallel_for(kPanels, [&](std::size_t begin, std::size_t end) {
    for (std::size_t panel = begin; panel < end; ++panel) {
      for (int k = 0; k < 8; ++k) {
        const double u = (static_cast<double>(panel) + 0.5 * (kGlNodes[k] + 1.0)) / kPanels;
        const double w = 0.5 * kGlWeights[k] / kPanels * r_at(u);
        const double lu = std::log(u);
        const double l1u = std::log1p(-u);
        for (int j = 0; j <= M; ++j) {
          const double lw = log_choose[j] + j * lu + (M - j) * l1u;
          if (lw < -745.0) continue;
          const double term = std::exp(lw);
          if (!std::isfinite(term)) bad = true;
          partial[panel][static_cast<std::size_t>(j / K)] += w * term;
        }
      }
    }
  });
  if (bad) throw NumericalError("label_probabilities: non-finite binomial weight");
  LabelProbabilities out;
  out.p.assign(static_cast<std::size_t>(L), 0.0);
  for (const auto& part : partial) {
    for (int s = 0; s < L; ++s) out.p[s] += part[s];
  }
  double sum = 0.0;
  for (double v : out.p) sum += v;
  out.sum_error = sum - 1.0;
  return out;
}

double nu_K(double B, double C, int K) {
  if (K < 1) throw std::domain_error("nu_K: K must be positive");
  const double D = C / 2.0 + 2.0 * B;
  return 2.0 * std::pow(4.0 * D * D * std::log(static_cast<double>(K)) / std::sqrt(static_cast<double>(K)), 0.4);
}

PowerPredicates power_lower_bound_predicates(double delta_T, double n, int L, int K, double alpha, double beta,
                                             double B, double C) {
  if (!(n > 0.0) || L < 1 || K < 1 || !(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0)) {
    throw std::domain_error("power_lower_bound_predicates: invalid parameters");
  }
  PowerPredicates out;
  out.nu_K = nu_K(B, C, K);
  if (!(out.nu_K < 1.0)) throw std::domain_error("power_lower_bound_predicates: nu_K must be below 1 (increase K)");
  const double slack = C / L + L * out.nu_K;
  const double scale = std::pow(static_cast<double>(L), 0.25) / std::sqrt(n);
  out.rhs_finite = 32.0 * scale * std::sqrt(std::max(1.0 / std::sqrt(alpha), 1.0 / beta)) + slack;
  const double lb = std::log(1.0 / beta);
  const double la = std::log(1.0 / alpha);
  out.rhs_asym = scale * std::max(std::sqrt(3.0 * lb) + std::sqrt(3.0 * lb + 2.0 * std::sqrt(la) + 2.0 * la), 1.0) + slack;
  out.finite_ok = delta_T >= out.rhs_finite;
  out.asym_ok = delta_T >= out.rhs_asym;
  return out;
}

double noncentrality(std::span<const double> p, double n) {
  const auto L = static_cast<double>(p.size());
  double ss = 0.0;
  for (double v : p) ss += (v - 1.0 / L) * (v - 1.0 / L);
  return n * L * ss;
}

double predicted_power_asym(std::span<const double> p, double n, int L, double alpha) {
  if (static_cast<int>(p.size()) != L) throw std::domain_error("predicted_power_asym: p must have L entries");
  const double lambda = noncentrality(p, n);
  const double theta = threshold(ThresholdKind::asym, L, alpha);
  return 1.0 - chi2_cdf(theta, {static_cast<double>(L - 1), lambda});
}

PowerReport power_report(const OdcCurve& curve, double n, int L, int K, double alpha, double beta) {
  PowerReport rep;
  rep.delta_T = dependency_power(curve);
  const auto probs = label_probabilities(curve, K, L);
  rep.p_s = probs.p;
  rep.sum_error = probs.sum_error;
  for (double v : rep.p_s) rep.l1_gap += std::fabs(v - 1.0 / L);
  rep.B = curve.bound_B;
  rep.C = curve.lipschitz_C;
  rep.nu_K = nu_K(rep.B, rep.C, K);
  if (rep.nu_K < 1.0) {
    const auto pred = power_lower_bound_predicates(rep.delta_T, n, L, K, alpha, beta, rep.B, rep.C);
    rep.lower_bound_finite = pred.rhs_finite;
    rep.lower_bound_asym = pred.rhs_asym;
    rep.finite_ok = pred.finite_ok;
    rep.asym_ok = pred.asym_ok;
  } else {
    rep.lower_bound_finite = kInf;
    rep.lower_bound_asym = kInf;
  }
  rep.predicted_power_asym = predicted_power_asym(rep.p_s, n, L, alpha);
  return rep;
}

GaussianExpectation gaussian_expectation(const std::function<double(double)>& f, int budget, double tolerance) {
  if (budget < 1 || budget > 20) throw std::domain_error("gaussian_expectation: budget must lie in [1, 20]");
  boost::math::quadrature::exp_sinh<double> integrator(static_cast<std::size_t>(budget));
  GaussianExpectation out;
  try {
    for (double sign : {-1.0, 1.0}) {
      double err = 0.0;
      double l1 = 0.0;
      out.value += integrator.integrate([&](double x) { return f(sign * x) * normal_pdf(x); }, 0.0, kInf, tolerance, &err, &l1);
      out.error += err;
    }
  } catch (const std::exception& e) {
    throw NumericalError(std::string("gaussian_expectation: ") + e.what());
  }
  if (!std::isfinite(out.value) || out.error > 1e3 * tolerance * std::max(1.0, std::fabs(out.value))) {
    throw NumericalError("gaussian_expectation: no convergence within budget (estimate " + std::to_string(out.value) +
                         ", error " + std::to_string(out.error) + ")");
  }
  return out;
}

CrtEta crt_eta(const std::function<double(double)>& g, int budget) {
  CrtEta out;
  out.e_g2 = gaussian_expectation([&](double x) { const double v = g(x); return v * v; }, budget).value;
  out.e_x2g2 = gaussian_expectation([&](double x) { const double v = x * g(x); return v * v; }, budget).value;
  out.e_g = gaussian_expectation(g, budget).value;
  out.e_x2g = gaussian_expectation([&](double x) { return x * x * g(x); }, budget).value;
  out.eta = std::sqrt((3.0 + 2.0 * out.e_x2g2) / (3.0 + 2.0 * out.e_g2));
  const double eta = out.eta;
  out.e_phi2 = gaussian_expectation([eta](double z) { const double p = normal_cdf(eta * z); return p * p; }, budget).value;
  return out;
}

double crt_concentration_bound(double delta, int M, const CrtEta& eta) {
  if (!(delta > 0.0) || M < 1 || !(M > 1.0 / delta)) throw std::domain_error("crt_concentration_bound: need M > 1/delta");
  const double gap = delta - 1.0 / M;
  return (1.0 / (4.0 * M) + (M - 1.0) / M * (eta.e_phi2 - 0.25)) / (gap * gap);
}

}  // namespace pcr
