#include "pcr/randkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "pcr/errors.hpp"

namespace pcr {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Marsaglia-Tsang ziggurat with 128 layers (Doornik's ZIGNOR layout).
constexpr int kZigLayers = 128;
constexpr double kZigR = 3.442619855899;
constexpr double kZigV = 9.91256303526217e-3;

struct ZigguratTables {
  double x[kZigLayers + 1];
  double ratio[kZigLayers];

  ZigguratTables() {
    double f = std::exp(-0.5 * kZigR * kZigR);
    x[0] = kZigV / f;
    x[1] = kZigR;
    x[kZigLayers] = 0.0;
    for (int i = 2; i < kZigLayers; ++i) {
      x[i] = std::sqrt(-2.0 * std::log(kZigV / x[i - 1] + f));
      f = std::exp(-0.5 * x[i] * x[i]);
    }
    for (int i = 0; i < kZigLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }
};

const ZigguratTables kZig;

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

double open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * kTwoPow53Inv;
}

constexpr int kGammaMaxIter = 500;
constexpr double kGammaEps = 1e-15;

double gamma_prefactor(double s, double x) {
  return std::exp(-x + s * std::log(x) - std::lgamma(s));
}

double lower_gamma_series(double s, double x) {
  double term = 1.0 / s;
  double sum = term;
  for (int n = 1; n <= kGammaMaxIter; ++n) {
    term *= x / (s + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kGammaEps) return sum * gamma_prefactor(s, x);
  }
  throw NumericalError("reg_lower_gamma: series did not converge (s=" + std::to_string(s) +
                       ", x=" + std::to_string(x) + ")");
}

// Upper tail Q(s, x) by the modified Lentz continued fraction.
double upper_gamma_fraction(double s, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kGammaMaxIter; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kGammaEps) return gamma_prefactor(s, x) * h;
  }
  throw NumericalError("reg_lower_gamma: continued fraction did not converge (s=" +
                       std::to_string(s) + ", x=" + std::to_string(x) + ")");
}

double central_chi2_cdf(double x, double dof) { return reg_lower_gamma(0.5 * dof, 0.5 * x); }

void check_params(const Chi2Params& params) {
  if (!(params.dof > 0.0)) throw std::domain_error("chi-squared dof must be positive");
  if (!(params.noncentrality >= 0.0)) throw std::domain_error("noncentrality must be non-negative");
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
  std::uint32_t k0 = key[0], k1 = key[1];
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c0;
    const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c2;
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    c0 = hi1 ^ c1 ^ k0;
    c2 = hi0 ^ c3 ^ k1;
    c1 = static_cast<std::uint32_t>(p1);
    c3 = static_cast<std::uint32_t>(p0);
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  return {c0, c1, c2, c3};
}

std::uint64_t stream_key(std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = 0x6A09E667F3BCC909ull;
  for (std::uint64_t v : path) h = splitmix64(h ^ splitmix64(v));
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

void RngStream::refill() {
  // Four independent blocks per refill; interleaving hides multiply latency.
  constexpr int kLanes = kBufferSize / 2;
  std::uint32_t c0[kLanes], c1[kLanes], c2[kLanes], c3[kLanes];
  for (int l = 0; l < kLanes; ++l) {
    const std::uint64_t block = block_ + static_cast<std::uint64_t>(l);
    c0[l] = static_cast<std::uint32_t>(block);
    c1[l] = static_cast<std::uint32_t>(block >> 32);
    c2[l] = static_cast<std::uint32_t>(stream_id_);
    c3[l] = static_cast<std::uint32_t>(stream_id_ >> 32);
  }
  std::uint32_t k0 = static_cast<std::uint32_t>(seed_);
  std::uint32_t k1 = static_cast<std::uint32_t>(seed_ >> 32);
  for (int round = 0; round < 10; ++round) {
    for (int l = 0; l < kLanes; ++l) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kPhiloxM0) * c0[l];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kPhiloxM1) * c2[l];
      c0[l] = static_cast<std::uint32_t>(p1 >> 32) ^ c1[l] ^ k0;
      c2[l] = static_cast<std::uint32_t>(p0 >> 32) ^ c3[l] ^ k1;
      c1[l] = static_cast<std::uint32_t>(p1);
      c3[l] = static_cast<std::uint32_t>(p0);
    }
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  for (int l = 0; l < kLanes; ++l) {
    buffer_[2 * l] = (static_cast<std::uint64_t>(c1[l]) << 32) | c0[l];
    buffer_[2 * l + 1] = (static_cast<std::uint64_t>(c3[l]) << 32) | c2[l];
  }
  block_ += kLanes;
  buffered_ = kBufferSize;
}

std::uint64_t RngStream::next_u64() {
  if (buffered_ == 0) refill();
  return buffer_[kBufferSize - buffered_--];
}

double RngStream::uniform() { return open_unit(next_u64()); }

std::uint64_t RngStream::below(std::uint64_t bound) {
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double RngStream::normal() {
  for (;;) {
    const std::uint64_t bits = next_u64();
    const int layer = static_cast<int>(bits & (kZigLayers - 1));
    const double u = 2.0 * open_unit(bits) - 1.0;
    if (std::fabs(u) < kZig.ratio[layer]) return u * kZig.x[layer];
    if (layer == 0) {
      double x;
      double y;
      do {
        x = std::log(uniform()) / kZigR;
        y = std::log(uniform());
      } while (-2.0 * y < x * x);
      return u < 0.0 ? x - kZigR : kZigR - x;
    }
    const double x = u * kZig.x[layer];
    const double f0 = std::exp(-0.5 * (kZig.x[layer] * kZig.x[layer] - x * x));
    const double f1 = std::exp(-0.5 * (kZig.x[layer + 1] * kZig.x[layer + 1] - x * x));
    if (f1 + uniform() * (f0 - f1) < 1.0) return x;
  }
}

double gaussian_sample(RngStream& rng, double mean, double sd) {
  if (!(sd > 0.0)) throw std::domain_error("gaussian_sample: sd must be positive");
  return mean + sd * rng.normal();
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double normal_pdf(double x) { return 0.3989422804014327 * std::exp(-0.5 * x * x); }

double normal_quantile(double p) {
  if (std::isnan(p) || p < 0.0 || p > 1.0) throw std::domain_error("normal_quantile: p must lie in [0, 1]");
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();

  // Acklam's rational approximation followed by Halley refinement.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int iter = 0; iter < 2; ++iter) {
    // Work with the smaller tail to keep relative accuracy.
    const double e = x < 0.0 ? normal_cdf(x) - p : (1.0 - p) - normal_cdf(-x);
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double reg_lower_gamma(double s, double x) {
  if (!(s > 0.0)) throw std::domain_error("reg_lower_gamma: s must be positive");
  if (!(x >= 0.0)) throw std::domain_error("reg_lower_gamma: x must be non-negative");
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (x < s + 1.0) return std::min(1.0, lower_gamma_series(s, x));
  return std::max(0.0, 1.0 - upper_gamma_fraction(s, x));
}

double chi2_cdf(double x, const Chi2Params& params) {
  check_params(params);
  if (!(x > 0.0)) return 0.0;
  const double lambda = params.noncentrality;
  if (lambda == 0.0) return central_chi2_cdf(x, params.dof);

  // Poisson(lambda/2) mixture of central CDFs, summed outward from the mode
  // until the unvisited Poisson mass drops below 1e-14.
  const double mu = 0.5 * lambda;
  const double mode = std::floor(mu);
  auto log_weight = [mu](double j) { return -mu + j * std::log(mu) - std::lgamma(j + 1.0); };

  double mass = std::exp(log_weight(mode));
  double total = mass * central_chi2_cdf(x, params.dof + 2.0 * mode);
  double lo = mode - 1.0;
  double hi = mode + 1.0;
  double w_lo = lo >= 0.0 ? std::exp(log_weight(lo)) : 0.0;
  double w_hi = std::exp(log_weight(hi));
  while (1.0 - mass >= 1e-14) {
    if (w_lo <= 0.0 && w_hi < 1e-300) break;
    if (w_lo >= w_hi) {
      mass += w_lo;
      total += w_lo * central_chi2_cdf(x, params.dof + 2.0 * lo);
      lo -= 1.0;
      w_lo = lo >= 0.0 ? std::exp(log_weight(lo)) : 0.0;
    } else {
      mass += w_hi;
      total += w_hi * central_chi2_cdf(x, params.dof + 2.0 * hi);
      hi += 1.0;
      w_hi = std::exp(log_weight(hi));
    }
  }
  return std::clamp(total, 0.0, 1.0);
}

double chi2_pdf(double x, double dof) {
  if (x < 0.0) return 0.0;
  const double k2 = 0.5 * dof;
  if (x == 0.0) return dof < 2.0 ? std::numeric_limits<double>::infinity() : (dof == 2.0 ? 0.5 : 0.0);
  return std::exp((k2 - 1.0) * std::log(x) - 0.5 * x - k2 * M_LN2 - std::lgamma(k2));
}

double chi2_quantile(double p, const Chi2Params& params) {
  check_params(params);
  if (params.noncentrality != 0.0) throw std::domain_error("chi2_quantile: central distribution only");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("chi2_quantile: p must lie in (0, 1)");

  double lo = 0.0;
  double hi = std::max(1.0, params.dof);
  while (central_chi2_cdf(hi, params.dof) < p) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw NumericalError("chi2_quantile: bracket expansion failed");
  }

  // Newton steps, falling back to bisection whenever a step leaves the bracket.
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double f = central_chi2_cdf(x, params.dof) - p;
    if (f == 0.0) return x;
    if (f < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double slope = chi2_pdf(x, params.dof);
    double next = (slope > 0.0 && std::isfinite(slope)) ? x - f / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, x)) return next;
    x = next;
  }
  return x;
}

double log_binomial(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace pcr
