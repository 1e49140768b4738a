#include "pcr/parameter_free.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "../support/models.hpp"
#include "pcr/sampler.hpp"
#include "pcr/score.hpp"

namespace pcr {
namespace {

class PfFixture : public ::testing::Test {
 protected:
  std::vector<double> v = {0.4, -0.8, 0.2};
  GaussianLinearSampler sampler{v};
  ResidualLinearZ1Score score;
};

TEST_F(PfFixture, SingleElementGridMatchesPlainPcr) {
  const auto data = testing::generate(testing::quadratic_design(v, 0.5), 300, 2);
  for (auto kind : {ThresholdKind::finite, ThresholdKind::asym}) {
    PfConfig cfg;
    cfg.grid = {6};
    cfg.K = 10;
    cfg.p_kind = kind;
    const auto pf = run_parameter_free(data, sampler, score, cfg, 4);
    PcrConfig pc;
    pc.L = 6;
    pc.K = 10;
    const auto plain = run_pcr_with_prefix(data, sampler, score, pc, 4, 6);
    const double p = kind == ThresholdKind::finite ? plain.p_finite : plain.p_asym;
    EXPECT_EQ(pf.p_star, p);
    ASSERT_EQ(pf.per_l.size(), 1u);
    EXPECT_EQ(pf.per_l[0].U, plain.statistic);
  }
}

TEST_F(PfFixture, BonferroniCombination) {
  const auto data = testing::generate(testing::quadratic_design(v, 0.3), 500, 3);
  PfConfig cfg;
  cfg.K = 20;
  const auto res = run_parameter_free(data, sampler, score, cfg, 8);
  ASSERT_EQ(res.per_l.size(), cfg.grid.size());
  double min_p = 1.0;
  for (const auto& e : res.per_l) {
    EXPECT_LE(res.p_star, cfg.grid.size() * e.p + 1e-15);
    min_p = std::min(min_p, e.p);
  }
  EXPECT_DOUBLE_EQ(res.p_star, std::min(1.0, cfg.grid.size() * min_p));
  EXPECT_EQ(res.reject, res.p_star <= cfg.alpha);
}

TEST_F(PfFixture, InvariantToGridOrder) {
  const auto data = testing::generate(testing::quadratic_design(v, 0.3), 400, 4);
  PfConfig a;
  a.K = 10;
  a.grid = {2, 4, 8, 16};
  PfConfig b = a;
  b.grid = {16, 2, 8, 4};
  const auto ra = run_parameter_free(data, sampler, score, a, 5);
  const auto rb = run_parameter_free(data, sampler, score, b, 5);
  EXPECT_EQ(ra.p_star, rb.p_star);
  for (const auto& e : ra.per_l) {
    const auto it = std::find_if(rb.per_l.begin(), rb.per_l.end(), [&](const PfEntry& f) { return f.L == e.L; });
    ASSERT_NE(it, rb.per_l.end());
    EXPECT_EQ(it->U, e.U);
  }
}

TEST_F(PfFixture, SuperUniformUnderNull) {
  const int reps = 1500;
  std::vector<double> ps;
  PfConfig cfg;
  cfg.K = 5;
  cfg.grid = {2, 4, 8};
  cfg.p_kind = ThresholdKind::finite;
  const auto design = testing::quadratic_design(v, 0.0);
  for (int rep = 0; rep < reps; ++rep) {
    const auto data = testing::generate(design, 100, 10, rep);
    ps.push_back(run_parameter_free(data, sampler, score, cfg, rep).p_star);
  }
  for (double t : {0.05, 0.1, 0.2}) {
    const double rate = std::count_if(ps.begin(), ps.end(), [t](double p) { return p <= t; }) / static_cast<double>(reps);
    EXPECT_LE(rate, t + 3 * std::sqrt(t * (1 - t) / reps)) << "t=" << t;
  }
}

TEST_F(PfFixture, SharedCounterfeitMode) {
  const auto data = testing::generate(testing::quadratic_design(v, 2.0), 400, 6);
  PfConfig cfg;
  cfg.K = 4;
  cfg.grid = {2, 4, 8};
  cfg.shared_counterfeits = true;
  const auto res = run_parameter_free(data, sampler, score, cfg, 1);
  EXPECT_EQ(res.per_l.size(), 3u);
  EXPECT_TRUE(res.reject);
  cfg.grid = {3, 8};
  EXPECT_THROW(run_parameter_free(data, sampler, score, cfg, 1), std::domain_error);
}

TEST(PfConfig, Validation) {
  PfConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.grid = {};
  EXPECT_THROW(cfg.validate(), std::domain_error);
  cfg.grid = {1, 2};
  EXPECT_THROW(cfg.validate(), std::domain_error);
  cfg.grid = {2, 2};
  EXPECT_THROW(cfg.validate(), std::domain_error);
  cfg.grid = {2, 4};
  cfg.K = 0;
  EXPECT_THROW(cfg.validate(), std::domain_error);
}

}  // namespace
}  // namespace pcr
