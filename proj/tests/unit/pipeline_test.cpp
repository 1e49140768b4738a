#include "pcr/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "../support/models.hpp"
#include "pcr/errors.hpp"
#include "pcr/score.hpp"

namespace pcr {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name, const std::string& contents) {
  const auto p = fs::temp_directory_path() / ("pcr_pipeline_" + name);
  std::ofstream(p) << contents;
  return p;
}

TripRecord trip(std::string start, std::string end, double hour, double duration) {
  TripRecord r;
  r.start_loc = std::move(start);
  r.end_loc = std::move(end);
  r.hour = hour;
  r.duration = duration;
  r.user_type = "Member";
  r.date = "3";
  r.weekday = "Mon";
  return r;
}

TEST(LoadTrips, ThreeRows) {
  const auto p = temp_file("three.csv",
                           "duration_min,start_loc,end_loc,hour,user_type,date,weekday\n"
                           "12.5,A,B,8.25,Member,2011-10-03,Monday\n"
                           "7,A,C,17.5,Casual,4,Tue\n"
                           "30,B,A,23.9,Registered,5,3\n");
  std::vector<std::string> warnings;
  const auto recs = load_trips(p.string(), &warnings);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_TRUE(warnings.empty());
  EXPECT_EQ(recs[0].duration, 12.5);
  EXPECT_EQ(recs[1].start_loc, "A");
  EXPECT_EQ(recs[1].end_loc, "C");
  EXPECT_EQ(recs[2].hour, 23.9);
  EXPECT_EQ(recs[2].line, 4u);
  EXPECT_EQ(encode_response(recs[0], TripResponse::date), 3.0);
  EXPECT_EQ(encode_response(recs[1], TripResponse::weekday), 2.0);
  EXPECT_EQ(encode_response(recs[2], TripResponse::user_type), 1.0);
}

TEST(LoadTrips, ColumnOrderIsFree) {
  const auto p = temp_file("order.csv",
                           "weekday,date,user_type,hour,end_loc,start_loc,duration_min\n"
                           "Friday,9,Casual,1.5,Y,X,3\n");
  const auto recs = load_trips(p.string());
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].start_loc, "X");
  EXPECT_EQ(recs[0].duration, 3.0);
}

TEST(LoadTrips, NegativeDurationRejectedWithLine) {
  const auto p = temp_file("neg.csv",
                           "duration_min,start_loc,end_loc,hour,user_type,date,weekday\n"
                           "5,A,B,1,Member,1,Mon\n"
                           "-2,A,B,1,Member,1,Mon\n");
  try {
    load_trips(p.string());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("neg.csv:3:"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("duration"), std::string::npos) << e.what();
  }
}

TEST(LoadTrips, MalformedRows) {
  const std::string header = "duration_min,start_loc,end_loc,hour,user_type,date,weekday\n";
  EXPECT_THROW(load_trips(temp_file("short.csv", header + "5,A,B,1\n").string()), DataError);
  EXPECT_THROW(load_trips(temp_file("num.csv", header + "five,A,B,1,Member,1,Mon\n").string()), DataError);
  EXPECT_THROW(load_trips(temp_file("hour.csv", header + "5,A,B,24,Member,1,Mon\n").string()), DataError);
  EXPECT_THROW(load_trips(temp_file("cols.csv", "duration_min,start_loc\n5,A\n").string()), DataError);
  EXPECT_THROW(load_trips("/nonexistent/trips.csv"), DataError);
}

TEST(LoadTrips, EmptyFileWarns) {
  std::vector<std::string> warnings;
  EXPECT_TRUE(load_trips(temp_file("empty.csv", "").string(), &warnings).empty());
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(LoadTrips, WriteRoundTrip) {
  TripFixtureSpec spec;
  spec.route_counts = {3, 4};
  spec.test_per_route = 2;
  const auto fx = make_trip_fixture(spec, 5);
  const auto p = fs::temp_directory_path() / "pcr_pipeline_roundtrip.csv";
  write_trips_csv(fx.train, p.string());
  const auto back = load_trips(p.string());
  ASSERT_EQ(back.size(), fx.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].duration, fx.train[i].duration);
    EXPECT_EQ(back[i].hour, fx.train[i].hour);
    EXPECT_EQ(back[i].user_type, fx.train[i].user_type);
    EXPECT_EQ(back[i].date, fx.train[i].date);
  }
}

TEST(Encodings, Values) {
  EXPECT_EQ(encode_user_type("casual"), 0.0);
  EXPECT_EQ(encode_user_type("MEMBER"), 1.0);
  EXPECT_THROW(encode_user_type("guest"), DataError);
  EXPECT_EQ(encode_weekday("Monday"), 1.0);
  EXPECT_EQ(encode_weekday("fri"), 5.0);
  EXPECT_EQ(encode_weekday("7"), 7.0);
  EXPECT_THROW(encode_weekday("Funday"), DataError);
  EXPECT_EQ(encode_date("2011-10-31"), 31.0);
  EXPECT_EQ(encode_date("12"), 12.0);
  EXPECT_THROW(encode_date("32"), DataError);
  EXPECT_THROW(encode_date("Oct 3"), DataError);
}

TEST(FilterRoutes, Boundary) {
  std::vector<TripRecord> train;
  for (int i = 0; i < 19; ++i) train.push_back(trip("A", "B", 1, 5));
  for (int i = 0; i < 20; ++i) train.push_back(trip("A", "C", 1, 5));
  for (int i = 0; i < 21; ++i) train.push_back(trip("C", "A", 1, 5));
  const std::vector<TripRecord> test = {trip("A", "B", 2, 3), trip("A", "C", 2, 3), trip("C", "A", 2, 3),
                                        trip("Z", "Z", 2, 3), trip("B", "A", 2, 3)};
  const auto kept = filter_routes(test, train);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].end_loc, "C");
  EXPECT_EQ(kept[1].start_loc, "C");
  EXPECT_EQ(filter_routes(test, train, 19).size(), 3u);
}

TEST(FilterRoutes, FixtureSurvivorCount) {
  TripFixtureSpec spec;
  spec.route_counts = {5, 19, 20, 40, 0, 100};
  spec.test_per_route = 7;
  const auto fx = make_trip_fixture(spec, 1);
  EXPECT_EQ(fx.train.size(), 184u);
  EXPECT_EQ(fx.test.size(), 42u);
  // Routes with 20, 40 and 100 training rides survive.
  EXPECT_EQ(filter_routes(fx.test, fx.train).size(), 21u);
}

TEST(KernelFit, SinglePoint) {
  const auto m = kernel_fit({trip("A", "B", 8, 12)});
  for (double h : {0.0, 8.0, 23.5}) {
    EXPECT_DOUBLE_EQ(m.mu({"A", "B"}, h), 12.0);
    EXPECT_EQ(m.sigma2({"A", "B"}, h), KernelModel::kVarianceFloor);
  }
}

TEST(KernelFit, ConstantDurations) {
  std::vector<TripRecord> train;
  for (int i = 0; i < 30; ++i) train.push_back(trip("A", "B", 0.7 * i, 9.0));
  const auto m = kernel_fit(train);
  EXPECT_DOUBLE_EQ(m.mu({"A", "B"}, 10.3), 9.0);
  EXPECT_EQ(m.sigma2({"A", "B"}, 10.3), KernelModel::kVarianceFloor);
}

TEST(KernelFit, RecoversStepFunction) {
  std::vector<TripRecord> train;
  RngStream rng(4, 0);
  for (int i = 0; i < 4000; ++i) {
    const double h = 24.0 * rng.uniform();
    train.push_back(trip("A", "B", h, 10.0 + (h > 12.0 ? 5.0 : 0.0) + rng.normal()));
  }
  const auto m = kernel_fit(train);
  // About 55 effective points inside one bandwidth: mean error sd ~ 0.14.
  EXPECT_NEAR(m.mu({"A", "B"}, 9.0), 10.0, 0.5);
  EXPECT_NEAR(m.mu({"A", "B"}, 15.0), 15.0, 0.5);
  EXPECT_NEAR(m.sigma2({"A", "B"}, 9.0), 1.0, 0.5);
  EXPECT_NEAR(m.mu({"A", "B"}, 12.0), 12.5, 0.6);
}

TEST(KernelFit, TranslationEquivariant) {
  std::vector<TripRecord> train, shifted;
  RngStream rng(6, 0);
  for (int i = 0; i < 50; ++i) {
    const double h = 24.0 * rng.uniform();
    const double d = 5.0 + 3.0 * rng.uniform();
    train.push_back(trip("A", "B", h, d));
    shifted.push_back(trip("A", "B", h, d + 7.25));
  }
  const auto m = kernel_fit(train);
  const auto s = kernel_fit(shifted);
  for (double h : {0.5, 6.0, 13.3, 22.0}) {
    EXPECT_NEAR(s.mu({"A", "B"}, h), m.mu({"A", "B"}, h) + 7.25, 1e-10);
    EXPECT_NEAR(s.sigma2({"A", "B"}, h), m.sigma2({"A", "B"}, h), 1e-9);
  }
}

TEST(KernelFit, DistantQueryKeepsMass) {
  const auto m = kernel_fit({trip("A", "B", 0.0, 4), trip("A", "B", 1.0, 6)});
  // Weights exp(-23^2 / (2/9)) underflow without the shift.
  EXPECT_NEAR(m.mu({"A", "B"}, 23.9), 6.0, 1e-12);
}

TEST(KernelFit, Errors) {
  EXPECT_THROW(kernel_fit({trip("A", "B", 1, 1)}, 0.0), std::domain_error);
  const auto m = kernel_fit({trip("A", "B", 1, 1)});
  EXPECT_THROW(m.mu({"B", "A"}, 1.0), DataError);
}

TEST(KernelFit, JsonRoundTrip) {
  std::vector<TripRecord> train;
  for (int i = 0; i < 10; ++i) train.push_back(trip(i % 2 ? "A" : "C", "B", 2.3 * i, 3.0 + i));
  const auto m = kernel_fit(train, 15.0);
  const auto p = fs::temp_directory_path() / "pcr_pipeline_kernel.json";
  m.save(p.string());
  const auto back = KernelModel::load(p.string());
  EXPECT_EQ(back.bandwidth_minutes(), 15.0);
  ASSERT_EQ(back.route_count(), 2u);
  EXPECT_EQ(back.mu({"C", "B"}, 5.0), m.mu({"C", "B"}, 5.0));
  const auto sampler = sampler_from_name("kernel:" + p.string());
  EXPECT_NE(sampler->descriptor().find("kernel"), std::string::npos);
}

TEST(KernelSampler, DrawsFromFittedMoments) {
  std::vector<TripRecord> train;
  RngStream rng(8, 0);
  for (int i = 0; i < 500; ++i) train.push_back(trip("A", "B", 24.0 * rng.uniform(), 20.0 + 2.0 * rng.normal()));
  auto model = std::make_shared<const KernelModel>(kernel_fit(train));
  const KernelSampler sampler(model);
  const std::vector<double> z = {0.0, 10.0};
  const auto [mu, s2] = model->moments(0, 10.0);
  std::vector<double> xs(40000);
  RngStream draws(1, 2);
  sampler.draw_many(z, draws, xs);
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= xs.size();
  EXPECT_NEAR(mean, mu, 4.0 * std::sqrt(s2 / xs.size()));
  EXPECT_NEAR(var, s2, 4.0 * s2 * std::sqrt(2.0 / xs.size()));
  EXPECT_THROW(sampler.draw(std::vector<double>{0.5, 1.0}, draws), DataError);
  EXPECT_THROW(sampler.draw(std::vector<double>{3.0, 1.0}, draws), DataError);
  EXPECT_THROW(sampler.draw(std::vector<double>{0.0}, draws), DataError);
}

TEST(OlsFit, ExactLine) {
  const std::vector<double> x = {0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(2.0 * v + 1.0);
  const auto f = ols_fit(x, y);
  EXPECT_NEAR(f.b0, 1.0, 1e-12);
  EXPECT_NEAR(f.b1, 2.0, 1e-12);
}

TEST(OlsFit, ConstantResponse) {
  const std::vector<double> x = {1, 5, 2, 8};
  const std::vector<double> y = {3, 3, 3, 3};
  const auto f = ols_fit(x, y);
  EXPECT_DOUBLE_EQ(f.b0, 3.0);
  EXPECT_DOUBLE_EQ(f.b1, 0.0);
}

TEST(OlsFit, ResidualsOrthogonal) {
  RngStream rng(2, 2);
  std::vector<double> x(300), y(300);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = 3.0 * rng.normal() + 1.0;
    y[i] = 0.5 * x[i] + rng.normal() * 2.0 - 4.0;
  }
  const auto f = ols_fit(x, y);
  double dot = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - f.b0 - f.b1 * x[i];
    dot += e * x[i];
    sum += e;
  }
  EXPECT_LT(std::fabs(dot), 1e-10 * x.size());
  EXPECT_LT(std::fabs(sum), 1e-10 * x.size());
}

TEST(OlsFit, Errors) {
  EXPECT_THROW(ols_fit(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), std::domain_error);
  EXPECT_THROW(ols_fit(std::vector<double>{1}, std::vector<double>{1}), std::domain_error);
  EXPECT_THROW(ols_fit(std::vector<double>{1, 2}, std::vector<double>{1}), std::domain_error);
}

Dataset linear_data(std::size_t n, std::uint64_t seed, double effect) {
  testing::LinearGaussianDesign d;
  d.v = {0.7, -0.4};
  d.response = [effect](double x, std::span<const double> z, RngStream& rng) {
    return z[0] * z[0] + effect * x + rng.normal();
  };
  return testing::generate(d, n, seed);
}

TEST(GroupedPcr, GroupSizeOneEqualsRunPcr) {
  const auto data = linear_data(300, 1, 0.3);
  const GaussianLinearSampler sampler({0.7, -0.4});
  const auto score = score_builtin("residual_linear_z1");
  for (auto ties : {TieRule::literal, TieRule::random}) {
    GroupedPcrConfig g;
    g.group_size = 1;
    g.L = 5;
    g.K = 4;
    g.ties = ties;
    const auto a = grouped_pcr(data, sampler, *score, g, 77);
    const auto b = run_pcr(data, sampler, *score, g.pcr(), 77);
    EXPECT_EQ(a.ranks, b.ranks);
    EXPECT_EQ(a.counts.w, b.counts.w);
    EXPECT_EQ(a.statistic, b.statistic);
    EXPECT_EQ(a.p_finite, b.p_finite);
    EXPECT_EQ(a.reject, b.reject);
  }
}

TEST(GroupedPcr, GroupsPartitionAndDropRemainder) {
  const auto groups = make_groups(23, 4, 9);
  ASSERT_EQ(groups.size(), 5u);
  std::vector<int> seen(23, 0);
  for (const auto& g : groups) {
    ASSERT_EQ(g.size(), 4u);
    EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
    for (auto j : g) ++seen[j];
  }
  EXPECT_EQ(std::accumulate(seen.begin(), seen.end(), 0), 20);
  EXPECT_EQ(make_groups(23, 4, 9), groups);
  EXPECT_NE(make_groups(23, 4, 10), groups);
}

TEST(GroupedPcr, MatchesDirectComputation) {
  const auto data = linear_data(10, 3, 1.0);
  const GaussianLinearSampler sampler({0.7, -0.4});
  const auto score = score_builtin("residual_linear_z1");
  GroupedPcrConfig g;
  g.group_size = 3;
  g.L = 3;
  g.K = 2;
  const auto res = grouped_pcr(data, sampler, *score, g, 5);
  const auto groups = make_groups(10, 3, 5);
  ASSERT_EQ(res.ranks.size(), 3u);
  const int M = g.K * g.L - 1;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    double original = 0.0;
    std::vector<double> cf(M, 0.0);
    for (auto j : groups[k]) {
      RngStream rng(5, stream_key({0, j}));
      original += score->score(data.x[j], data.y[j], data.z_row(j)) / 3.0;
      for (int m = 0; m < M; ++m) {
        cf[m] += score->score(sampler.draw(data.z_row(j), rng), data.y[j], data.z_row(j)) / 3.0;
      }
    }
    int rank = 1;
    for (double c : cf) rank += c <= original ? 1 : 0;
    EXPECT_EQ(res.ranks[k], rank) << k;
  }
  EXPECT_EQ(res.counts.n, 3u);
}

TEST(GroupedPcr, NullSizeControlledWithFiniteThreshold) {
  const GaussianLinearSampler sampler({0.7, -0.4});
  const auto score = score_builtin("residual_linear_z1");
  GroupedPcrConfig g;
  g.group_size = 4;
  g.L = 4;
  g.K = 5;
  g.threshold_kind = ThresholdKind::finite;
  const int reps = 400;
  int rejects = 0;
  for (int r = 0; r < reps; ++r) {
    const auto data = linear_data(400, 1000 + r, 0.0);
    rejects += grouped_pcr(data, sampler, *score, g, 2000 + r).reject ? 1 : 0;
  }
  EXPECT_LE(static_cast<double>(rejects) / reps, 0.1);
}

TEST(GroupedPcr, Validation) {
  const auto data = linear_data(3, 1, 0.0);
  const GaussianLinearSampler sampler({0.7, -0.4});
  const auto score = score_builtin("residual_linear_z1");
  GroupedPcrConfig g;
  g.group_size = 4;
  EXPECT_THROW(grouped_pcr(data, sampler, *score, g, 1), std::domain_error);
  g.group_size = 0;
  EXPECT_THROW(grouped_pcr(data, sampler, *score, g, 1), std::domain_error);
}

TripFixtureSpec large_fixture(double effect) {
  TripFixtureSpec spec;
  spec.route_counts = {5, 19, 20};
  spec.route_counts.resize(38, 4000);
  spec.test_per_route = 200;
  spec.planted_effect = effect;
  return spec;
}

TEST(Pipeline, PlantedDependenceIsDetected) {
  const auto fx = make_trip_fixture(large_fixture(1.0), 11);
  const auto report = run_pipeline(fx.test, fx.train, {TripResponse::user_type}, PipelineConfig{}, 11);
  EXPECT_EQ(report.test_kept, 36u * 200u);
  ASSERT_EQ(report.responses.size(), 1u);
  const auto& r = report.responses[0];
  EXPECT_EQ(r.groups, 1800u);
  EXPECT_EQ(r.result.L, 10);
  EXPECT_EQ(r.result.K, 200);
  EXPECT_LE(r.result.p_finite, 0.05);
  const auto j = to_json(report);
  EXPECT_EQ(j["user_type"]["N_groups"], 1800);
  EXPECT_EQ(j["user_type"]["p_finite"], r.result.p_finite);
}

TEST(Pipeline, StageLabelledErrors) {
  auto fx = make_trip_fixture(large_fixture(0.0), 2);
  fx.test.back().user_type = "guest";
  fx.test.back().line = 42;
  try {
    run_pipeline(fx.test, fx.train, {TripResponse::user_type}, PipelineConfig{}, 1);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("user_type:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 42"), std::string::npos) << msg;
  }
}

}  // namespace
}  // namespace pcr
