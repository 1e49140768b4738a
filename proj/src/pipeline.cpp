#include "pcr/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>

#include "pcr/csv.hpp"
#include "pcr/errors.hpp"
#include "pcr/parallel.hpp"
#include "pcr/score.hpp"

namespace pcr {

namespace {

constexpr std::uint64_t kGroupTag = 0x67726F757073;   // "groups"
constexpr std::uint64_t kFixtureTag = 0x6669787475;   // "fixtu"

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool needs_quoting(const std::string& s) { return s.find_first_of(",\"\n") != std::string::npos; }

}  // namespace

std::vector<TripRecord> load_trips(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.empty() || line == "\r") {
    if (warnings) warnings->push_back(path + ": empty file, no records");
    return {};
  }
  const auto header = split_csv_line(line);
  const std::vector<std::string> columns = split_csv_line(kTripCsvHeader);
  std::vector<std::size_t> col(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto it = std::find(header.begin(), header.end(), columns[c]);
    if (it == header.end()) throw DataError(path + ":1: missing column '" + columns[c] + "'");
    col[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<TripRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    if (cells.size() != header.size()) {
      throw DataError(where + "expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    }
    TripRecord r;
    r.line = line_no;
    try {
      r.duration = parse_double(cells[col[0]]);
      r.hour = parse_double(cells[col[3]]);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    if (!(r.duration > 0.0)) throw DataError(where + "duration must be positive");
    if (!(r.hour >= 0.0 && r.hour < 24.0)) throw DataError(where + "hour must lie in [0, 24)");
    r.start_loc = cells[col[1]];
    r.end_loc = cells[col[2]];
    r.user_type = cells[col[4]];
    r.date = cells[col[5]];
    r.weekday = cells[col[6]];
    if (r.start_loc.empty() || r.end_loc.empty()) throw DataError(where + "empty location");
    out.push_back(std::move(r));
  }
  if (out.empty() && warnings) warnings->push_back(path + ": no records");
  return out;
}

void write_trips_csv(const std::vector<TripRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << kTripCsvHeader << '\n';
  for (const auto& r : records) {
    for (const auto* s : {&r.start_loc, &r.end_loc, &r.user_type, &r.date, &r.weekday}) {
      if (needs_quoting(*s)) throw DataError("field '" + *s + "' cannot be written unquoted");
    }
    out << format_double(r.duration) << ',' << r.start_loc << ',' << r.end_loc << ',' << format_double(r.hour)
        << ',' << r.user_type << ',' << r.date << ',' << r.weekday << '\n';
  }
  if (!out) throw DataError("write failed for " + path);
}

std::vector<TripRecord> filter_routes(const std::vector<TripRecord>& test, const std::vector<TripRecord>& train,
                                      std::size_t min_count) {
  std::map<RouteKey, std::size_t> counts;
  for (const auto& r : train) ++counts[route_of(r)];
  std::vector<TripRecord> kept;
  for (const auto& r : test) {
    const auto it = counts.find(route_of(r));
    if (it != counts.end() && it->second >= min_count) kept.push_back(r);
  }
  return kept;
}

KernelModel::KernelModel(double bandwidth_minutes, std::map<RouteKey, std::vector<std::pair<double, double>>> points)
    : bandwidth_minutes_(bandwidth_minutes) {
  if (!(bandwidth_minutes > 0.0)) throw std::domain_error("kernel bandwidth must be positive");
  for (auto& [key, pts] : points) {
    if (pts.empty()) continue;
    index_[key] = keys_.size();
    keys_.push_back(key);
    std::vector<double> h, d;
    for (const auto& [hour, dur] : pts) {
      h.push_back(hour);
      d.push_back(dur);
    }
    hours_.push_back(std::move(h));
    durations_.push_back(std::move(d));
  }
}

std::size_t KernelModel::route_id(const RouteKey& route) const {
  const auto it = index_.find(route);
  if (it == index_.end()) throw DataError("no kernel model for route " + route.first + " -> " + route.second);
  return it->second;
}

std::pair<double, double> KernelModel::moments(std::size_t id, double hour) const {
  if (id >= keys_.size()) throw DataError("route id " + std::to_string(id) + " out of range");
  const auto& h = hours_[id];
  const auto& d = durations_[id];
  const double b = bandwidth_minutes_ / 60.0;
  // Shift exponents by the nearest point so distant queries keep positive mass.
  double nearest = INFINITY;
  for (double hi : h) nearest = std::min(nearest, (hour - hi) * (hour - hi));
  double sw = 0.0, swd = 0.0;
  std::vector<double> w(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    w[i] = std::exp(-((hour - h[i]) * (hour - h[i]) - nearest) / (2.0 * b * b));
    sw += w[i];
    swd += w[i] * d[i];
  }
  if (!(sw > 0.0)) throw DataError("zero kernel mass for route " + keys_[id].first + " -> " + keys_[id].second);
  const double mu = swd / sw;
  double sv = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) sv += w[i] * (d[i] - mu) * (d[i] - mu);
  return {mu, std::max(sv / sw, kVarianceFloor)};
}

nlohmann::ordered_json KernelModel::to_json() const {
  nlohmann::ordered_json j;
  j["bandwidth_minutes"] = bandwidth_minutes_;
  auto routes = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < keys_.size(); ++r) {
    routes.push_back({{"id", r},
                      {"start_loc", keys_[r].first},
                      {"end_loc", keys_[r].second},
                      {"hours", hours_[r]},
                      {"durations", durations_[r]}});
  }
  j["routes"] = routes;
  return j;
}

KernelModel KernelModel::from_json(const nlohmann::ordered_json& j) {
  try {
    std::map<RouteKey, std::vector<std::pair<double, double>>> points;
    for (const auto& r : j.at("routes")) {
      const auto h = r.at("hours").get<std::vector<double>>();
      const auto d = r.at("durations").get<std::vector<double>>();
      if (h.size() != d.size()) throw DataError("kernel model: hours and durations differ in length");
      auto& pts = points[{r.at("start_loc").get<std::string>(), r.at("end_loc").get<std::string>()}];
      for (std::size_t i = 0; i < h.size(); ++i) pts.emplace_back(h[i], d[i]);
    }
    return KernelModel(j.at("bandwidth_minutes").get<double>(), std::move(points));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("kernel model: ") + e.what());
  }
}

KernelModel KernelModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return from_json(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

void KernelModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << to_json().dump(2) << '\n';
}

KernelModel kernel_fit(const std::vector<TripRecord>& train, double bandwidth_minutes) {
  std::map<RouteKey, std::vector<std::pair<double, double>>> points;
  for (const auto& r : train) points[route_of(r)].emplace_back(r.hour, r.duration);
  return KernelModel(bandwidth_minutes, std::move(points));
}

KernelSampler::KernelSampler(std::shared_ptr<const KernelModel> model) : model_(std::move(model)) {
  if (!model_) throw std::invalid_argument("KernelSampler: null model");
}

std::pair<double, double> KernelSampler::moments_at(std::span<const double> z) const {
  if (z.size() != 2) throw DataError("kernel sampler expects z = (route id, hour), got " + std::to_string(z.size()) +
                                     " covariates");
  const double id = z[0];
  if (!(id >= 0.0) || id != std::floor(id)) throw DataError("kernel sampler: bad route id");
  return model_->moments(static_cast<std::size_t>(id), z[1]);
}

double KernelSampler::draw(std::span<const double> z, RngStream& rng) const {
  const auto [mu, s2] = moments_at(z);
  return mu + std::sqrt(s2) * rng.normal();
}

void KernelSampler::draw_many(std::span<const double> z, RngStream& rng, std::span<double> out) const {
  const auto [mu, s2] = moments_at(z);
  const double sd = std::sqrt(s2);
  for (double& x : out) x = mu + sd * rng.normal();
}

std::string KernelSampler::descriptor() const {
  return "kernel(routes=" + std::to_string(model_->route_count()) +
         ",bandwidth_min=" + format_double(model_->bandwidth_minutes()) + ")";
}

std::shared_ptr<ConditionalSampler> sampler_from_name(const std::string& spec) {
  const std::string prefix = "kernel:";
  if (spec.rfind(prefix, 0) == 0) {
    return std::make_shared<KernelSampler>(std::make_shared<KernelModel>(KernelModel::load(spec.substr(prefix.size()))));
  }
  return sampler_from_spec(spec);
}

OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::domain_error("ols_fit: x and y differ in length");
  if (x.size() < 2) throw std::domain_error("ols_fit: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::domain_error("ols_fit: x has zero variance");
  OlsFit f;
  f.b1 = sxy / sxx;
  f.b0 = my - f.b1 * mx;
  return f;
}

PcrConfig GroupedPcrConfig::pcr() const {
  PcrConfig c;
  c.L = L;
  c.K = K;
  c.alpha = alpha;
  c.threshold_kind = threshold_kind;
  c.ties = ties;
  return c;
}

void GroupedPcrConfig::validate() const {
  if (group_size < 1) throw std::domain_error("group_size must be at least 1");
  pcr().validate();
}

std::vector<std::vector<std::size_t>> make_groups(std::size_t n, int group_size, std::uint64_t seed) {
  const auto g = static_cast<std::size_t>(group_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (g > 1) {
    RngStream rng(seed, stream_key({kGroupTag}));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<std::vector<std::size_t>> groups(n / g);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    groups[k].assign(order.begin() + static_cast<std::ptrdiff_t>(k * g),
                     order.begin() + static_cast<std::ptrdiff_t>((k + 1) * g));
    std::sort(groups[k].begin(), groups[k].end());
  }
  std::sort(groups.begin(), groups.end());
  return groups;
}

PcrResult grouped_pcr(const Dataset& data, const ConditionalSampler& sampler, const ScoreFunction& score,
                      const GroupedPcrConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  data.validate();
  if (data.size() < static_cast<std::size_t>(cfg.group_size)) {
    throw std::domain_error("grouped_pcr: fewer samples than group_size");
  }
  const PcrConfig pcfg = cfg.pcr();
  const auto M = static_cast<std::size_t>(pcfg.M());
  const auto groups = make_groups(data.size(), cfg.group_size, seed);
  const double inv_g = 1.0 / cfg.group_size;
  std::vector<int> ranks(groups.size());

  parallel_for(groups.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<double> xs(M), scores(M), group_scores(M);
    for (std::size_t k = begin; k < end; ++k) {
      std::fill(group_scores.begin(), group_scores.end(), 0.0);
      double original = 0.0;
      // Ties are broken with the continuation of the first member's stream.
      std::optional<RngStream> tie_rng;
      for (std::size_t j : groups[k]) {
        const auto z = data.z_row(j);
        RngStream rng(seed, stream_key({0, j}));
        try {
          sampler.draw_many(z, rng, xs);
          score.score_many(xs, data.y[j], z, scores);
          original += score.score(data.x[j], data.y[j], z);
        } catch (const DataError& e) {
          if (e.index() != DataError::kNoIndex) throw;
          throw DataError(e.what(), j);
        } catch (const NumericalError&) {
          throw;
        } catch (const std::exception& e) {
          throw DataError(e.what(), j);
        }
        for (std::size_t m = 0; m < M; ++m) group_scores[m] += scores[m];
        if (!tie_rng) tie_rng.emplace(rng);
      }
      if (cfg.group_size > 1) {
        original *= inv_g;
        for (double& s : group_scores) s *= inv_g;
      }
      if (!std::isfinite(original)) throw DataError("non-finite group score", groups[k].front());
      for (double s : group_scores) {
        if (!std::isfinite(s)) throw DataError("non-finite counterfeit group score", groups[k].front());
      }
      if (pcfg.ties == TieRule::literal) {
        ranks[k] = rank_among_counterfeits(original, group_scores);
      } else {
        ranks[k] = rank_among_counterfeits(original, group_scores, *tie_rng);
      }
    }
  });

  PcrResult res = summarize_counts(count_labels(ranks, pcfg.K, pcfg.L), pcfg);
  res.ranks = std::move(ranks);
  res.seed = seed;
  return res;
}

std::string to_string(TripResponse r) {
  switch (r) {
    case TripResponse::user_type: return "user_type";
    case TripResponse::date: return "date";
    case TripResponse::weekday: return "weekday";
  }
  return "unknown";
}

TripResponse parse_trip_response(const std::string& s) {
  for (auto r : {TripResponse::user_type, TripResponse::date, TripResponse::weekday}) {
    if (to_string(r) == s) return r;
  }
  throw std::invalid_argument("unknown response '" + s + "'");
}

double encode_user_type(const std::string& s) {
  const auto v = lower(s);
  if (v == "casual") return 0.0;
  if (v == "member" || v == "registered") return 1.0;
  throw DataError("unknown user_type '" + s + "'");
}

double encode_date(const std::string& s) {
  std::string day = s;
  if (s.size() == 10 && s[4] == '-' && s[7] == '-') day = s.substr(8);
  double v = 0.0;
  try {
    v = parse_double(day);
  } catch (const DataError&) {
    throw DataError("cannot parse date '" + s + "'");
  }
  if (!(v >= 1.0 && v <= 31.0)) throw DataError("day of month out of range in '" + s + "'");
  return v;
}

double encode_weekday(const std::string& s) {
  static const char* const names[] = {"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"};
  const auto v = lower(s);
  for (int i = 0; i < 7; ++i) {
    const std::string name = names[i];
    if (v == name || v == name.substr(0, 3) || v == std::to_string(i + 1)) return i + 1.0;
  }
  throw DataError("unknown weekday '" + s + "'");
}

double encode_response(const TripRecord& r, TripResponse response) {
  try {
    switch (response) {
      case TripResponse::user_type: return encode_user_type(r.user_type);
      case TripResponse::date: return encode_date(r.date);
      case TripResponse::weekday: return encode_weekday(r.weekday);
    }
  } catch (const DataError& e) {
    throw DataError("line " + std::to_string(r.line) + ": " + e.what());
  }
  return 0.0;
}

PipelineReport run_pipeline(const std::vector<TripRecord>& test, const std::vector<TripRecord>& train,
                            const std::vector<TripResponse>& responses, const PipelineConfig& cfg,
                            std::uint64_t seed) {
  cfg.grouped.validate();
  PipelineReport report;
  report.train_records = train.size();
  report.test_records = test.size();
  const auto kept = filter_routes(test, train, cfg.min_route_count);
  report.test_kept = kept.size();
  if (kept.size() < static_cast<std::size_t>(cfg.grouped.group_size)) {
    throw DataError("filter: only " + std::to_string(kept.size()) + " test records remain");
  }

  std::vector<TripRecord> train_kept;
  {
    std::set<RouteKey> needed;
    for (const auto& r : kept) needed.insert(route_of(r));
    for (const auto& r : train) {
      if (needed.count(route_of(r))) train_kept.push_back(r);
    }
  }
  const auto model = std::make_shared<const KernelModel>(kernel_fit(train_kept, cfg.bandwidth_minutes));
  const KernelSampler sampler(model);

  Dataset data;
  data.q = 2;
  for (const auto& r : kept) {
    data.x.push_back(r.duration);
    data.z.push_back(static_cast<double>(model->route_id(route_of(r))));
    data.z.push_back(r.hour);
  }
  std::vector<double> train_x;
  for (const auto& r : train_kept) train_x.push_back(r.duration);

  for (auto response : responses) {
    ResponseOutcome out;
    out.response = response;
    const std::string stage = to_string(response) + ": ";
    try {
      std::vector<double> train_y;
      for (const auto& r : train_kept) train_y.push_back(encode_response(r, response));
      out.ols = ols_fit(train_x, train_y);
      data.y.clear();
      for (const auto& r : kept) data.y.push_back(encode_response(r, response));
      const OlsResidualScore score(out.ols.b0, out.ols.b1);
      out.result = grouped_pcr(data, sampler, score, cfg.grouped, seed);
    } catch (const DataError& e) {
      throw DataError(stage + e.what());
    } catch (const std::domain_error& e) {
      throw DataError(stage + e.what());
    }
    out.groups = out.result.counts.n;
    report.responses.push_back(std::move(out));
  }
  return report;
}

PipelineReport run_pipeline(const std::string& test_csv, const std::string& train_csv,
                            const std::vector<TripResponse>& responses, const PipelineConfig& cfg,
                            std::uint64_t seed) {
  const auto test = load_trips(test_csv);
  const auto train = load_trips(train_csv);
  return run_pipeline(test, train, responses, cfg, seed);
}

nlohmann::ordered_json to_json(const PipelineReport& report) {
  nlohmann::ordered_json j;
  for (const auto& r : report.responses) {
    j[to_string(r.response)] = {{"p_finite", r.result.p_finite}, {"p_asym", r.result.p_asym},
                                {"U", r.result.statistic},       {"N_groups", r.groups},
                                {"L", r.result.L},               {"K", r.result.K}};
  }
  return j;
}

TripFixture make_trip_fixture(const TripFixtureSpec& spec, std::uint64_t seed) {
  static const char* const days[] = {"Monday", "Tuesday", "Wednesday", "Thursday", "Friday"};
  TripFixture fx;
  RngStream rng(seed, stream_key({kFixtureTag}));
  auto make = [&](std::size_t route) {
    TripRecord r;
    r.start_loc = "S" + std::to_string(route);
    r.end_loc = "E" + std::to_string(route % 7);
    r.hour = 24.0 * rng.uniform();
    const bool member = rng.uniform() < 0.6;
    r.user_type = member ? "Member" : "Casual";
    const double base = 8.0 + 2.0 * static_cast<double>(route % 11);
    r.duration = base + 3.0 * std::sin(2.0 * M_PI * r.hour / 24.0) + (member ? spec.planted_effect : 0.0) + spec.noise_sd * rng.normal();
    r.duration = std::max(r.duration, 0.5);
    const int day = 1 + static_cast<int>(rng.below(31));
    r.date = "2011-10-" + std::string(day < 10 ? "0" : "") + std::to_string(day);
    r.weekday = days[rng.below(5)];
    return r;
  };
  for (std::size_t route = 0; route < spec.route_counts.size(); ++route) {
    for (std::size_t i = 0; i < spec.route_counts[route]; ++i) fx.train.push_back(make(route));
    for (std::size_t i = 0; i < spec.test_per_route; ++i) fx.test.push_back(make(route));
  }
  return fx;
}

}  // namespace pcr
