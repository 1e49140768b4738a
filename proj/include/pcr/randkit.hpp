#pragma once

// Counter-based random streams and the special functions used by the tests.

#include <array>
#include <cstdint>
#include <initializer_list>

namespace pcr {

// Philox4x32-10 block: 128-bit counter, 64-bit key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Mixes a path of indices (replicate, run, sample, ...) into one stream id.
std::uint64_t stream_key(std::initializer_list<std::uint64_t> path);

// A reproducible stream of random numbers. The key is the global seed; the
// stream id occupies the upper half of the Philox counter and the draw index
// the lower half, so any (seed, stream_id) pair can be regenerated on any
// worker without coordination.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  // Standard normal (ziggurat).
  double normal();
  // Uniform integer in [0, bound); bound > 0.
  std::uint64_t below(std::uint64_t bound);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

 private:
  static constexpr int kBufferSize = 8;
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, kBufferSize> buffer_{};
  int buffered_ = 0;
};

double gaussian_sample(RngStream& rng, double mean, double sd);

struct Chi2Params {
  double dof = 1.0;
  double noncentrality = 0.0;
};

double normal_cdf(double x);
double normal_pdf(double x);
// Inverse of normal_cdf on (0, 1); returns -inf / +inf at 0 / 1.
double normal_quantile(double p);

// Regularized lower incomplete gamma P(s, x).
double reg_lower_gamma(double s, double x);

// Central or noncentral chi-squared CDF. Negative x returns 0.
double chi2_cdf(double x, const Chi2Params& params);
double chi2_pdf(double x, double dof);

// Central chi-squared quantile; params.noncentrality must be 0.
double chi2_quantile(double p, const Chi2Params& params);

// log(n choose k) through lgamma.
double log_binomial(double n, double k);

}  // namespace pcr
