#include "pcr/randkit.hpp"

#include <gtest/gtest.h>

#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "../support/oracles.hpp"
#include "pcr/errors.hpp"

namespace {

using pcr::Chi2Params;

TEST(PhiloxTest, KnownAnswerVectors) {
  const auto zero = pcr::philox4x32({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(zero[0], 0x6627e8d5u);
  EXPECT_EQ(zero[1], 0xe169c58du);
  EXPECT_EQ(zero[2], 0xbc57ac4cu);
  EXPECT_EQ(zero[3], 0x9b00dbd8u);

  const auto ones = pcr::philox4x32({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u});
  EXPECT_EQ(ones[0], 0x408f276du);
  EXPECT_EQ(ones[1], 0x41c83b0eu);
  EXPECT_EQ(ones[2], 0xa20bc7c6u);
  EXPECT_EQ(ones[3], 0x6d5451fdu);

  const auto pi = pcr::philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
  EXPECT_EQ(pi[0], 0xd16cfe09u);
  EXPECT_EQ(pi[1], 0x94fdcceb);
  EXPECT_EQ(pi[2], 0x5001e420u);
  EXPECT_EQ(pi[3], 0x24126ea1u);
}

TEST(RngStreamTest, StreamMatchesRawBlocks) {
  pcr::RngStream rng(0x1234567890abcdefull, 0xfedcba0987654321ull);
  for (std::uint64_t block = 0; block < 10; ++block) {
    const auto out = pcr::philox4x32(
        {static_cast<std::uint32_t>(block), 0u, 0x87654321u, 0xfedcba09u}, {0x90abcdefu, 0x12345678u});
    EXPECT_EQ(rng.next_u64(), (static_cast<std::uint64_t>(out[1]) << 32) | out[0]);
    EXPECT_EQ(rng.next_u64(), (static_cast<std::uint64_t>(out[3]) << 32) | out[2]);
  }
}

TEST(RngStreamTest, IdenticalSeedAndStreamGiveIdenticalDraws) {
  pcr::RngStream a(42, 7);
  pcr::RngStream b(42, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(pcr::gaussian_sample(a, 0, 1), pcr::gaussian_sample(b, 0, 1));
}

TEST(RngStreamTest, InterleavingDoesNotChangePerStreamSequences) {
  std::vector<double> solo_a;
  std::vector<double> solo_b;
  {
    pcr::RngStream a(9, pcr::stream_key({0, 1}));
    pcr::RngStream b(9, pcr::stream_key({0, 2}));
    for (int i = 0; i < 50; ++i) solo_a.push_back(a.normal());
    for (int i = 0; i < 50; ++i) solo_b.push_back(b.normal());
  }
  pcr::RngStream a(9, pcr::stream_key({0, 1}));
  pcr::RngStream b(9, pcr::stream_key({0, 2}));
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(b.normal(), solo_b[i]);
    EXPECT_EQ(a.normal(), solo_a[i]);
  }
  EXPECT_NE(solo_a, solo_b);
}

TEST(RngStreamTest, StreamKeysDiffer) {
  EXPECT_NE(pcr::stream_key({0, 1}), pcr::stream_key({1, 0}));
  EXPECT_NE(pcr::stream_key({0}), pcr::stream_key({0, 0}));
  EXPECT_EQ(pcr::stream_key({3, 4}), pcr::stream_key({3, 4}));
}

TEST(RngStreamTest, UniformIsOpenInterval) {
  pcr::RngStream rng(1, 1);
  double lo = 1.0;
  double hi = 0.0;
  double sum = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(RngStreamTest, BelowIsUniform) {
  pcr::RngStream rng(5, 5);
  std::vector<int> hits(7, 0);
  const int n = 700000;
  for (int i = 0; i < n; ++i) ++hits[rng.below(7)];
  double chi2 = 0.0;
  for (int h : hits) chi2 += (h - n / 7.0) * (h - n / 7.0) / (n / 7.0);
  EXPECT_LT(chi2, 22.46);  // chi2_6 upper 0.001 point
}

TEST(GaussianSampleTest, MomentsAndSymmetry) {
  pcr::RngStream rng(2024, 3);
  const int n = 1000000;
  const double mean = 1.5;
  const double sd = 2.0;
  double sum = 0.0;
  double sq = 0.0;
  int below_mean = 0;
  for (int i = 0; i < n; ++i) {
    const double x = pcr::gaussian_sample(rng, mean, sd);
    sum += x;
    sq += (x - mean) * (x - mean);
    below_mean += x <= mean;
  }
  EXPECT_NEAR(sum / n, mean, 4.0 * sd / 1000.0);
  EXPECT_NEAR(sq / n, sd * sd, 4.0 * sd * sd * std::sqrt(2.0 / n));
  EXPECT_NEAR(static_cast<double>(below_mean) / n, 0.5, 0.002);
}

TEST(GaussianSampleTest, DistributionMatchesPhi) {
  pcr::RngStream rng(77, 0);
  const int n = 2000000;
  const std::vector<double> cuts = {-3.5, -2.5, -1.0, -0.3, 0.0, 0.7, 1.9, 3.0, 3.6};
  std::vector<int> below(cuts.size(), 0);
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    for (std::size_t c = 0; c < cuts.size(); ++c) below[c] += x <= cuts[c];
  }
  for (std::size_t c = 0; c < cuts.size(); ++c) {
    const double p = pcr::oracle::normal_cdf_by_quadrature(cuts[c]);
    EXPECT_NEAR(static_cast<double>(below[c]) / n, p, 4.5 * std::sqrt(p * (1 - p) / n)) << cuts[c];
  }
}

TEST(GaussianSampleTest, RejectsNonPositiveSd) {
  pcr::RngStream rng(1, 1);
  EXPECT_THROW(pcr::gaussian_sample(rng, 0.0, 0.0), std::domain_error);
  EXPECT_THROW(pcr::gaussian_sample(rng, 0.0, -1.0), std::domain_error);
}

TEST(NormalCdfTest, Examples) {
  EXPECT_EQ(pcr::normal_cdf(0.0), 0.5);
  EXPECT_EQ(pcr::normal_cdf(40.0), 1.0);
  EXPECT_NEAR(pcr::normal_cdf(1.959964), 0.975, 1e-6);
  EXPECT_NEAR(pcr::normal_cdf(1.959964), pcr::oracle::normal_cdf_by_quadrature(1.959964), 1e-12);
}

TEST(NormalCdfTest, SymmetryAndMonotonicity) {
  double prev = 0.0;
  for (double x = -10.0; x <= 10.0; x += 0.01) {
    const double v = pcr::normal_cdf(x);
    EXPECT_LE(std::fabs(v + pcr::normal_cdf(-x) - 1.0), 1e-15);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(RegLowerGammaTest, Examples) {
  EXPECT_NEAR(pcr::reg_lower_gamma(1.0, 1.0), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_EQ(pcr::reg_lower_gamma(3.0, 0.0), 0.0);
  EXPECT_EQ(pcr::reg_lower_gamma(3.0, INFINITY), 1.0);
  EXPECT_NEAR(pcr::reg_lower_gamma(2.5, 3.0), pcr::oracle::reg_lower_gamma_by_quadrature(2.5, 3.0), 1e-12);
}

TEST(RegLowerGammaTest, AgreesWithQuadratureOnBothBranches) {
  for (double s : {1.0, 1.5, 2.0, 4.5, 10.0, 32.0}) {
    for (double x : {0.1, 0.5, 1.0, 2.0, 5.0, 11.0, 20.0, 40.0}) {
      EXPECT_NEAR(pcr::reg_lower_gamma(s, x), pcr::oracle::reg_lower_gamma_by_quadrature(s, x), 1e-11)
          << "s=" << s << " x=" << x;
    }
  }
}

TEST(RegLowerGammaTest, Monotone) {
  for (double s : {0.5, 1.0, 3.5, 20.0}) {
    double prev = 0.0;
    for (double x = 0.0; x < 80.0; x += 0.05) {
      const double v = pcr::reg_lower_gamma(s, x);
      EXPECT_GE(v, prev);
      EXPECT_LE(v, 1.0);
      prev = v;
    }
  }
}

TEST(RegLowerGammaTest, DomainErrors) {
  EXPECT_THROW(pcr::reg_lower_gamma(0.0, 1.0), std::domain_error);
  EXPECT_THROW(pcr::reg_lower_gamma(1.0, -1.0), std::domain_error);
}

TEST(Chi2CdfTest, Examples) {
  EXPECT_EQ(pcr::chi2_cdf(0.0, {3.0, 0.0}), 0.0);
  EXPECT_EQ(pcr::chi2_cdf(-1.0, {3.0, 0.0}), 0.0);
  EXPECT_NEAR(pcr::chi2_cdf(2.0 * std::log(2.0), {2.0, 0.0}), 0.5, 1e-15);
}

TEST(Chi2CdfTest, NoncentralMatchesIndependentImplementation) {
  boost::math::non_central_chi_squared d(4.0, 3.0);
  EXPECT_NEAR(pcr::chi2_cdf(7.0, {4.0, 3.0}), boost::math::cdf(d, 7.0), 1e-8);
  for (double k : {1.0, 4.0, 9.0}) {
    for (double lambda : {0.5, 3.0, 25.0, 200.0}) {
      boost::math::non_central_chi_squared ref(k, lambda);
      for (double x : {0.5, 5.0, 20.0, 150.0, 300.0}) {
        EXPECT_NEAR(pcr::chi2_cdf(x, {k, lambda}), boost::math::cdf(ref, x), 1e-10)
            << "k=" << k << " lambda=" << lambda << " x=" << x;
      }
    }
  }
}

TEST(Chi2CdfTest, NoncentralMatchesMonteCarlo) {
  pcr::RngStream rng(31, 0);
  const int n = 400000;
  const double shift = std::sqrt(3.0);
  int below = 0;
  for (int i = 0; i < n; ++i) {
    const double a = rng.normal() + shift;
    const double b = rng.normal();
    const double c = rng.normal();
    const double d = rng.normal();
    below += a * a + b * b + c * c + d * d <= 7.0;
  }
  const double p = pcr::chi2_cdf(7.0, {4.0, 3.0});
  EXPECT_NEAR(static_cast<double>(below) / n, p, 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Chi2CdfTest, ZeroNoncentralityIsCentralBitForBit) {
  for (double k : {1.0, 2.0, 7.0, 63.0}) {
    for (double x : {0.01, 1.0, 6.0, 40.0}) {
      EXPECT_EQ(pcr::chi2_cdf(x, {k, 0.0}), pcr::reg_lower_gamma(0.5 * k, 0.5 * x));
    }
  }
}

TEST(Chi2CdfTest, MonotoneInX) {
  for (double lambda : {0.0, 5.0}) {
    double prev = 0.0;
    for (double x = 0.0; x < 60.0; x += 0.1) {
      const double v = pcr::chi2_cdf(x, {5.0, lambda});
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Chi2CdfTest, InvalidParams) {
  EXPECT_THROW(pcr::chi2_cdf(1.0, {0.0, 0.0}), std::domain_error);
  EXPECT_THROW(pcr::chi2_cdf(1.0, {2.0, -1.0}), std::domain_error);
}

TEST(Chi2QuantileTest, Examples) {
  EXPECT_NEAR(pcr::chi2_quantile(0.5, {2.0, 0.0}), 2.0 * std::log(2.0), 1e-12);
  const double oracle = pcr::oracle::bisect([](double x) { return pcr::chi2_cdf(x, {4.0, 0.0}); }, 0.9, 0.0, 100.0);
  EXPECT_NEAR(pcr::chi2_quantile(0.9, {4.0, 0.0}), oracle, 1e-9);
  EXPECT_NEAR(pcr::chi2_quantile(0.9, {4.0, 0.0}), 7.7794, 1e-4);
}

TEST(Chi2QuantileTest, RoundTripOverDofAndLevels) {
  for (int dof = 1; dof <= 64; ++dof) {
    for (int pct = 1; pct <= 99; ++pct) {
      const double p = pct / 100.0;
      const double q = pcr::chi2_quantile(p, {static_cast<double>(dof), 0.0});
      EXPECT_NEAR(pcr::chi2_cdf(q, {static_cast<double>(dof), 0.0}), p, 1e-10) << dof << " " << p;
    }
  }
}

TEST(Chi2QuantileTest, DomainErrors) {
  EXPECT_THROW(pcr::chi2_quantile(0.0, {2.0, 0.0}), std::domain_error);
  EXPECT_THROW(pcr::chi2_quantile(1.0, {2.0, 0.0}), std::domain_error);
  EXPECT_THROW(pcr::chi2_quantile(0.5, {2.0, 1.0}), std::domain_error);
}

TEST(LogBinomialTest, SmallValues) {
  EXPECT_NEAR(pcr::log_binomial(10, 3), std::log(120.0), 1e-12);
  EXPECT_NEAR(pcr::log_binomial(5, 0), 0.0, 1e-12);
}

}  // namespace

namespace {

TEST(NormalQuantileTest, InvertsCdf) {
  for (double p : {1e-300, 1e-12, 1e-5, 0.01, 0.02425, 0.2, 0.5, 0.8, 0.97575, 0.999, 1 - 1e-12}) {
    const double x = pcr::normal_quantile(p);
    EXPECT_NEAR(pcr::normal_cdf(x), p, 1e-14 + 1e-12 * p) << p;
  }
  EXPECT_EQ(pcr::normal_quantile(0.5), 0.0);
  EXPECT_TRUE(std::isinf(pcr::normal_quantile(0.0)));
  EXPECT_TRUE(std::isinf(pcr::normal_quantile(1.0)));
  EXPECT_THROW(pcr::normal_quantile(1.5), std::domain_error);
}

}  // namespace
