#include "pcr/report.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "pcr/errors.hpp"

namespace pcr {

namespace {

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) throw std::invalid_argument(where + ": unknown key '" + item.key() + "'");
  }
}

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Json to_json(const PcrResult& r) {
  Json j;
  j["n"] = r.counts.n;
  j["L"] = r.L;
  j["K"] = r.K;
  j["alpha"] = r.alpha;
  j["counts"] = r.counts.w;
  j["U"] = r.statistic;
  j["p_finite"] = r.p_finite;
  j["p_asym"] = r.p_asym;
  j["threshold_kind"] = to_string(r.threshold_kind);
  j["threshold"] = r.threshold;
  j["reject"] = r.reject;
  j["seed"] = r.seed;
  return j;
}

Json to_json(const CrtResult& r) {
  Json j;
  j["M"] = r.M;
  j["p_num"] = r.p.num;
  j["p_den"] = r.p.den;
  j["p"] = r.p.value();
  j["alpha"] = r.alpha;
  j["reject_one_lower"] = r.reject_one_lower;
  j["reject_one_upper"] = r.reject_one_upper;
  j["reject_two"] = r.reject_two;
  j["seed"] = r.seed;
  return j;
}

Json to_json(const PfResult& r) {
  Json j;
  j["grid"] = r.grid;
  Json per = Json::array();
  for (const auto& e : r.per_l) per.push_back(Json{{"L", e.L}, {"U", e.U}, {"p", e.p}});
  j["per_l"] = per;
  j["K"] = r.K;
  j["alpha"] = r.alpha;
  j["p_kind"] = to_string(r.p_kind);
  j["p_star"] = r.p_star;
  j["reject"] = r.reject;
  j["seed"] = r.seed;
  return j;
}

Json to_json(const RobustPcrResult& r) {
  Json j = to_json(r.pcr);
  j["delta"] = r.delta;
  j["qp_objective"] = r.qp_objective;
  j["p_hat"] = r.p_hat;
  j["plain_U"] = r.plain_statistic;
  return j;
}

Json to_json(const PowerReport& r) {
  Json j;
  j["delta_T"] = r.delta_T;
  j["p_s"] = r.p_s;
  j["sum_error"] = r.sum_error;
  j["l1_gap"] = r.l1_gap;
  j["nu_K"] = r.nu_K;
  // Infinite bounds (nu_K >= 1) become null.
  j["lower_bound_finite"] = std::isfinite(r.lower_bound_finite) ? Json(r.lower_bound_finite) : Json(nullptr);
  j["lower_bound_asym"] = std::isfinite(r.lower_bound_asym) ? Json(r.lower_bound_asym) : Json(nullptr);
  j["finite_ok"] = r.finite_ok;
  j["asym_ok"] = r.asym_ok;
  j["predicted_power_asym"] = r.predicted_power_asym;
  j["B"] = r.B;
  j["C"] = r.C;
  j["eta"] = r.eta ? Json(*r.eta) : Json(nullptr);
  return j;
}

Json to_json(const ModelSpec& m) {
  Json j;
  j["id"] = to_string(m.id);
  j["n"] = m.n;
  if (m.is_quadratic()) {
    j["p_dim"] = m.p_dim;
    j["a"] = m.effective_a();
    if (m.id == ModelId::robust_mismatch) j["eta"] = m.eta;
  } else {
    j["theta"] = m.theta;
  }
  return j;
}

Json to_json(const ExperimentSpec& s) {
  Json j;
  j["name"] = s.name;
  j["model"] = to_json(s.model);
  j["test"] = to_string(s.test);
  j["score"] = s.score.empty() ? default_score_name(s.model.id) : s.score;
  switch (s.test) {
    case TestKind::pcr:
    case TestKind::robust_pcr:
      j["L"] = s.pcr.L;
      j["K"] = s.pcr.K;
      j["alpha"] = s.pcr.alpha;
      j["threshold"] = to_string(s.pcr.threshold_kind);
      if (s.test == TestKind::robust_pcr) j["delta"] = s.robust_delta();
      break;
    case TestKind::crt:
      j["M"] = s.crt_M;
      j["alpha"] = s.pcr.alpha;
      j["sided"] = to_string(s.crt_sided);
      break;
    case TestKind::pf_pcr:
      j["grid"] = s.pf.grid;
      j["K"] = s.pf.K;
      j["alpha"] = s.pf.alpha;
      j["threshold"] = to_string(s.pf.p_kind);
      break;
  }
  j["replicates"] = s.replicates;
  j["seed"] = s.seed;
  return j;
}

Json to_json(const ExperimentReport& r, bool with_replicates) {
  Json j;
  j["spec"] = to_json(r.spec);
  j["u"] = r.coefficients.u;
  j["v"] = r.coefficients.v;
  j["rejections"] = r.rejections;
  j["rate"] = r.rate;
  j["se"] = r.se;
  if (with_replicates) {
    Json rows = Json::array();
    for (const auto& o : r.replicates) {
      rows.push_back(Json{{"reject", o.reject}, {"statistic", o.statistic}, {"p_finite", o.p_finite},
                          {"p_asym", o.p_asym}});
    }
    j["replicates"] = rows;
  }
  return j;
}

ModelSpec model_spec_from_json(const Json& j) {
  check_keys(j, {"id", "n", "p_dim", "a", "eta", "theta"}, "model");
  ModelSpec m;
  if (!j.contains("id")) throw std::invalid_argument("model: missing 'id'");
  m.id = parse_model_id(j.at("id").get<std::string>());
  read_if(j, "n", m.n);
  read_if(j, "p_dim", m.p_dim);
  read_if(j, "a", m.a);
  read_if(j, "eta", m.eta);
  read_if(j, "theta", m.theta);
  m.validate();
  return m;
}

ExperimentSpec experiment_spec_from_json(const Json& j) {
  check_keys(j,
             {"name", "model", "test", "score", "L", "K", "alpha", "threshold", "M", "sided", "grid", "delta",
              "shared_counterfeits", "replicates", "seed"},
             "experiment");
  ExperimentSpec s;
  read_if(j, "name", s.name);
  if (!j.contains("model")) throw std::invalid_argument("experiment: missing 'model'");
  s.model = model_spec_from_json(j.at("model"));
  if (j.contains("test")) s.test = parse_test_kind(j.at("test").get<std::string>());
  read_if(j, "score", s.score);
  read_if(j, "L", s.pcr.L);
  read_if(j, "K", s.pcr.K);
  read_if(j, "alpha", s.pcr.alpha);
  if (j.contains("threshold")) s.pcr.threshold_kind = parse_threshold_kind(j.at("threshold").get<std::string>());
  read_if(j, "M", s.crt_M);
  if (j.contains("sided")) s.crt_sided = parse_sidedness(j.at("sided").get<std::string>());
  read_if(j, "grid", s.pf.grid);
  read_if(j, "shared_counterfeits", s.pf.shared_counterfeits);
  s.pf.K = j.contains("K") ? s.pcr.K : s.pf.K;
  s.pf.alpha = s.pcr.alpha;
  s.pf.p_kind = s.pcr.threshold_kind;
  if (j.contains("delta")) s.delta = j.at("delta").get<double>();
  read_if(j, "replicates", s.replicates);
  read_if(j, "seed", s.seed);
  if (!s.score.empty()) score_builtin(s.score);  // reject unknown names early
  s.validate();
  return s;
}

std::vector<ExperimentSpec> read_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
  std::vector<ExperimentSpec> out;
  try {
    if (j.is_object() && j.contains("experiments")) {
      if (j.size() != 1) throw std::invalid_argument("top level: only 'experiments' is allowed");
      for (const auto& e : j.at("experiments")) out.push_back(experiment_spec_from_json(e));
    } else {
      out.push_back(experiment_spec_from_json(j));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  } catch (const std::domain_error& e) {
    throw DataError(path + ": " + e.what());
  }
  return out;
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace pcr
