#pragma once

// Trip-duration workflow: ingestion, route filtering, per-route kernel
// estimate of the duration law, OLS residual scores and grouped PCR.

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pcr/core.hpp"
#include "pcr/sampler.hpp"

namespace pcr {

inline constexpr const char* kTripCsvHeader = "duration_min,start_loc,end_loc,hour,user_type,date,weekday";

struct TripRecord {
  double duration = 0.0;  // minutes
  std::string start_loc;
  std::string end_loc;
  double hour = 0.0;  // [0, 24)
  std::string user_type;
  std::string date;     // day of month, or an ISO date
  std::string weekday;  // Monday..Sunday, Mon..Sun, or 1..7
  std::size_t line = 0;
};

using RouteKey = std::pair<std::string, std::string>;
inline RouteKey route_of(const TripRecord& r) { return {r.start_loc, r.end_loc}; }

// Columns may appear in any order; missing columns and malformed rows throw
// DataError with the line number. An empty file yields no records and a warning.
std::vector<TripRecord> load_trips(const std::string& path, std::vector<std::string>* warnings = nullptr);
void write_trips_csv(const std::vector<TripRecord>& records, const std::string& path);

// Test records whose route has at least min_count training rides.
std::vector<TripRecord> filter_routes(const std::vector<TripRecord>& test, const std::vector<TripRecord>& train,
                                      std::size_t min_count = 20);

// Per-route Nadaraya-Watson estimates of the mean and variance of duration
// given hour, Gaussian kernel.
class KernelModel {
 public:
  static constexpr double kVarianceFloor = 1e-6;

  KernelModel(double bandwidth_minutes, std::map<RouteKey, std::vector<std::pair<double, double>>> points);

  double bandwidth_minutes() const noexcept { return bandwidth_minutes_; }
  bool has_route(const RouteKey& route) const { return index_.count(route) > 0; }
  // Dense id in key order; throws DataError for an unknown route.
  std::size_t route_id(const RouteKey& route) const;
  const RouteKey& route_key(std::size_t id) const { return keys_.at(id); }
  std::size_t route_count() const noexcept { return keys_.size(); }

  // (mu, sigma^2) at an hour.
  std::pair<double, double> moments(std::size_t route_id, double hour) const;
  double mu(const RouteKey& route, double hour) const { return moments(route_id(route), hour).first; }
  double sigma2(const RouteKey& route, double hour) const { return moments(route_id(route), hour).second; }

  nlohmann::ordered_json to_json() const;
  static KernelModel from_json(const nlohmann::ordered_json& j);
  static KernelModel load(const std::string& path);
  void save(const std::string& path) const;

 private:
  double bandwidth_minutes_;
  std::vector<RouteKey> keys_;
  std::map<RouteKey, std::size_t> index_;
  std::vector<std::vector<double>> hours_;
  std::vector<std::vector<double>> durations_;
};

KernelModel kernel_fit(const std::vector<TripRecord>& train, double bandwidth_minutes = 20.0);

// X | Z ~ N(mu(route, hour), sigma^2(route, hour)) with z = (route id, hour).
class KernelSampler final : public ConditionalSampler {
 public:
  explicit KernelSampler(std::shared_ptr<const KernelModel> model);

  double draw(std::span<const double> z, RngStream& rng) const override;
  void draw_many(std::span<const double> z, RngStream& rng, std::span<double> out) const override;
  std::string descriptor() const override;

 private:
  std::pair<double, double> moments_at(std::span<const double> z) const;
  std::shared_ptr<const KernelModel> model_;
};

// `kernel:<model.json>` or anything sampler_from_spec accepts.
std::shared_ptr<ConditionalSampler> sampler_from_name(const std::string& spec);

struct OlsFit {
  double b0 = 0.0;
  double b1 = 0.0;
};

// Least squares y = b0 + b1 x. Throws std::domain_error for fewer than two
// points or zero variance in x.
OlsFit ols_fit(std::span<const double> x, std::span<const double> y);

struct GroupedPcrConfig {
  int group_size = 4;
  int L = 10;
  int K = 200;
  double alpha = 0.1;
  ThresholdKind threshold_kind = ThresholdKind::finite;
  TieRule ties = TieRule::literal;

  PcrConfig pcr() const;
  void validate() const;
};

// Samples are shuffled with stream (seed, "groups"), cut into consecutive
// groups and the remainder dropped. Member j draws its counterfeits from the
// same stream as in run_pcr; a group's score and counterfeit scores are member
// means. Groups are reported in order of their smallest member index, so
// group_size 1 reproduces run_pcr.
PcrResult grouped_pcr(const Dataset& data, const ConditionalSampler& sampler, const ScoreFunction& score,
                      const GroupedPcrConfig& cfg, std::uint64_t seed);

// Group membership used by grouped_pcr, groups in reporting order.
std::vector<std::vector<std::size_t>> make_groups(std::size_t n, int group_size, std::uint64_t seed);

enum class TripResponse { user_type, date, weekday };
std::string to_string(TripResponse r);
TripResponse parse_trip_response(const std::string& s);

// casual -> 0, member or registered -> 1 (case-insensitive).
double encode_user_type(const std::string& s);
// Day of month from "d" or "YYYY-MM-DD".
double encode_date(const std::string& s);
// Monday..Friday -> 1..5 (Saturday, Sunday -> 6, 7).
double encode_weekday(const std::string& s);
double encode_response(const TripRecord& r, TripResponse response);

struct PipelineConfig {
  GroupedPcrConfig grouped;
  double bandwidth_minutes = 20.0;
  std::size_t min_route_count = 20;
};

struct ResponseOutcome {
  TripResponse response = TripResponse::user_type;
  OlsFit ols;
  PcrResult result;
  std::size_t groups = 0;
};

struct PipelineReport {
  std::size_t train_records = 0;
  std::size_t test_records = 0;
  std::size_t test_kept = 0;
  std::vector<ResponseOutcome> responses;
};

PipelineReport run_pipeline(const std::vector<TripRecord>& test, const std::vector<TripRecord>& train,
                            const std::vector<TripResponse>& responses, const PipelineConfig& cfg,
                            std::uint64_t seed);
PipelineReport run_pipeline(const std::string& test_csv, const std::string& train_csv,
                            const std::vector<TripResponse>& responses, const PipelineConfig& cfg,
                            std::uint64_t seed);

// {response: {p_finite, p_asym, U, N_groups, L, K}}
nlohmann::ordered_json to_json(const PipelineReport& report);

// Synthetic trips in the same schema. Route r has route_counts[r] training
// rides and test_per_route test rides. Duration = base(route) + 3 sin(2 pi hour / 24)
// + planted_effect * member + N(0, noise_sd^2); membership is Bernoulli(0.6)
// independent of everything else.
struct TripFixtureSpec {
  std::vector<std::size_t> route_counts;
  std::size_t test_per_route = 50;
  double planted_effect = 0.0;
  double noise_sd = 3.0;
};

struct TripFixture {
  std::vector<TripRecord> train;
  std::vector<TripRecord> test;
};

TripFixture make_trip_fixture(const TripFixtureSpec& spec, std::uint64_t seed);

}  // namespace pcr
