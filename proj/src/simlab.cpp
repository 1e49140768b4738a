#include "pcr/simlab.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pcr/csv.hpp"
#include "pcr/parallel.hpp"
#include "pcr/robust.hpp"

namespace pcr {

namespace {

constexpr std::uint64_t kCoeffTag = 0x636F656666;  // "coeff"
constexpr std::uint64_t kDataTag = 0x64617461;     // "data"

}  // namespace

std::string to_string(ModelId id) {
  switch (id) {
    case ModelId::crt_failure_example: return "crt_failure_example";
    case ModelId::theta_family: return "theta_family";
    case ModelId::quadratic_null: return "quadratic_null";
    case ModelId::quadratic_shift: return "quadratic_shift";
    case ModelId::quadratic_a: return "quadratic_a";
    case ModelId::robust_mismatch: return "robust_mismatch";
  }
  return "unknown";
}

ModelId parse_model_id(const std::string& s) {
  for (auto id : {ModelId::crt_failure_example, ModelId::theta_family, ModelId::quadratic_null,
                  ModelId::quadratic_shift, ModelId::quadratic_a, ModelId::robust_mismatch}) {
    if (to_string(id) == s) return id;
  }
  throw std::invalid_argument("unknown model '" + s + "'");
}

bool ModelSpec::is_quadratic() const {
  return id != ModelId::crt_failure_example && id != ModelId::theta_family;
}

double ModelSpec::effective_a() const {
  switch (id) {
    case ModelId::quadratic_null: return 0.0;
    case ModelId::quadratic_shift: return 2.0;
    default: return a;
  }
}

void ModelSpec::validate() const {
  if (n < 1) throw std::domain_error("model: n must be at least 1");
  if (p_dim < 0) throw std::domain_error("model: p_dim must be non-negative");
  if (!is_quadratic() && !(theta > 0.0)) throw std::domain_error("model: theta must be positive");
  if (id == ModelId::robust_mismatch && !(eta > -1.0)) throw std::domain_error("model: eta must exceed -1");
}

ModelCoefficients draw_coefficients(const ModelSpec& spec, std::uint64_t seed) {
  ModelCoefficients c;
  if (!spec.is_quadratic()) return c;
  RngStream rng(seed, stream_key({kCoeffTag}));
  const auto p = static_cast<std::size_t>(spec.p_dim);
  c.u.resize(p);
  c.v.resize(p);
  for (double& x : c.u) x = rng.normal();
  for (double& x : c.v) x = rng.normal();
  return c;
}

GeneratedData gen_dataset(const ModelSpec& spec, const ModelCoefficients& coeffs, RngStream& rng) {
  spec.validate();
  GeneratedData out;
  Dataset& d = out.data;
  d.x.resize(spec.n);
  d.y.resize(spec.n);
  if (!spec.is_quadratic()) {
    d.q = 0;
    const double t2 = spec.theta * spec.theta;
    for (std::size_t i = 0; i < spec.n; ++i) {
      const double x = rng.normal();
      d.x[i] = x;
      d.y[i] = 1.0 / std::sqrt(t2 + x * x) + rng.normal();
    }
    out.true_sampler = std::make_shared<GaussianLinearSampler>(std::vector<double>{});
    return out;
  }
  const std::size_t p = coeffs.u.size();
  if (coeffs.v.size() != p || static_cast<int>(p) != spec.p_dim) {
    throw std::domain_error("gen_dataset: coefficient vectors do not match p_dim");
  }
  const double a = spec.effective_a();
  d.q = p;
  d.z.resize(spec.n * p);
  for (std::size_t i = 0; i < spec.n; ++i) {
    double uz = 0.0;
    double vz = 0.0;
    double* z = d.z.data() + i * p;
    for (std::size_t k = 0; k < p; ++k) {
      z[k] = rng.normal();
      uz += coeffs.u[k] * z[k];
      vz += coeffs.v[k] * z[k];
    }
    const double x = vz + rng.normal();
    d.x[i] = x;
    d.y[i] = uz * uz + a * x + rng.normal();
  }
  out.true_sampler = std::make_shared<GaussianLinearSampler>(coeffs.v);
  if (spec.id == ModelId::robust_mismatch) {
    out.approx_sampler = std::make_shared<GaussianLinearSampler>(coeffs.v, 1.0 + spec.eta);
  }
  return out;
}

std::unique_ptr<OdcModel> make_odc_model(const ModelSpec& spec, const ModelCoefficients& coeffs) {
  spec.validate();
  if (!spec.is_quadratic()) return std::make_unique<CrtFailureOdcModel>(spec.theta);
  const double sd = spec.id == ModelId::robust_mismatch ? 1.0 + spec.eta : 1.0;
  return std::make_unique<QuadraticOdcModel>(coeffs.u, coeffs.v, spec.effective_a(), sd);
}

std::string default_score_name(ModelId id) {
  return id == ModelId::crt_failure_example || id == ModelId::theta_family ? "sq_loss_xy" : "residual_linear_z1";
}

std::string to_string(TestKind kind) {
  switch (kind) {
    case TestKind::pcr: return "pcr";
    case TestKind::crt: return "crt";
    case TestKind::pf_pcr: return "pf_pcr";
    case TestKind::robust_pcr: return "robust_pcr";
  }
  return "unknown";
}

TestKind parse_test_kind(const std::string& s) {
  for (auto k : {TestKind::pcr, TestKind::crt, TestKind::pf_pcr, TestKind::robust_pcr}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown test '" + s + "'");
}

std::string to_string(Sidedness s) {
  switch (s) {
    case Sidedness::one_lower: return "one_lower";
    case Sidedness::one_upper: return "one_upper";
    case Sidedness::two: return "two";
  }
  return "unknown";
}

Sidedness parse_sidedness(const std::string& s) {
  for (auto k : {Sidedness::one_lower, Sidedness::one_upper, Sidedness::two}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown sidedness '" + s + "'");
}

void ExperimentSpec::validate() const {
  model.validate();
  if (replicates < 1) throw std::domain_error("replicates must be at least 1");
  switch (test) {
    case TestKind::pcr:
      pcr.validate();
      break;
    case TestKind::robust_pcr:
      pcr.validate();
      if (delta && !(*delta >= 0.0)) throw std::domain_error("delta must be non-negative");
      break;
    case TestKind::crt:
      if (crt_M < 1) throw std::domain_error("M must be at least 1");
      if (!(pcr.alpha > 0.0 && pcr.alpha < 1.0)) throw std::domain_error("alpha must lie in (0, 1)");
      break;
    case TestKind::pf_pcr:
      pf.validate();
      break;
  }
}

double ExperimentSpec::robust_delta() const {
  if (delta) return *delta;
  return model.id == ModelId::robust_mismatch ? pinsker_delta_gaussian(model.eta) : 0.0;
}

double rejection_se(double rate, int replicates) {
  return std::sqrt(rate * (1.0 - rate) / replicates);
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.spec = spec;
  report.coefficients = draw_coefficients(spec.model, spec.seed);
  const auto score = score_builtin(spec.score.empty() ? default_score_name(spec.model.id) : spec.score);
  const SummedSampleScore dataset_score(score);
  const double delta = spec.robust_delta();

  report.replicates.resize(static_cast<std::size_t>(spec.replicates));
  parallel_for(report.replicates.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      RngStream rng(spec.seed, stream_key({kDataTag, r}));
      const auto gen = gen_dataset(spec.model, report.coefficients, rng);
      const auto& sampler = gen.counterfeit_sampler();
      const std::uint64_t test_seed = stream_key({spec.seed, r});
      ReplicateOutcome& out = report.replicates[r];
      switch (spec.test) {
        case TestKind::pcr: {
          const auto res = run_pcr(gen.data, sampler, *score, spec.pcr, test_seed);
          out = {res.reject, res.statistic, res.p_finite, res.p_asym, res.statistic};
          break;
        }
        case TestKind::robust_pcr: {
          RobustConfig cfg{spec.pcr, delta};
          const auto res = run_robust_pcr(gen.data, sampler, *score, cfg, test_seed);
          out = {res.pcr.reject, res.pcr.statistic, res.pcr.p_finite, res.pcr.p_asym, res.plain_statistic};
          break;
        }
        case TestKind::crt: {
          const auto res = run_crt(gen.data, sampler, dataset_score, spec.crt_M, spec.pcr.alpha, test_seed);
          const bool reject = spec.crt_sided == Sidedness::two         ? res.reject_two
                              : spec.crt_sided == Sidedness::one_lower ? res.reject_one_lower
                                                                       : res.reject_one_upper;
          out = {reject, res.p.value(), res.p.value(), res.p.value(), res.original_score};
          break;
        }
        case TestKind::pf_pcr: {
          const auto res = run_parameter_free(gen.data, sampler, *score, spec.pf, test_seed);
          out = {res.reject, res.p_star, res.p_star, res.p_star, res.p_star};
          break;
        }
      }
    }
  });
  for (const auto& o : report.replicates) report.rejections += o.reject ? 1 : 0;
  report.rate = static_cast<double>(report.rejections) / spec.replicates;
  report.se = rejection_se(report.rate, spec.replicates);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string experiment_csv_row(const ExperimentReport& report, bool with_timing) {
  const auto& s = report.spec;
  std::ostringstream os;
  os << s.name << ',' << to_string(s.model.id) << ',' << to_string(s.test) << ',';
  switch (s.test) {
    case TestKind::pcr:
    case TestKind::robust_pcr:
      os << s.pcr.L << ',' << s.pcr.K << ',' << format_double(s.pcr.alpha) << ',' << to_string(s.pcr.threshold_kind);
      break;
    case TestKind::crt:
      os << ',' << s.crt_M << ',' << format_double(s.pcr.alpha) << ',' << to_string(s.crt_sided);
      break;
    case TestKind::pf_pcr: {
      for (std::size_t i = 0; i < s.pf.grid.size(); ++i) os << (i ? ";" : "") << s.pf.grid[i];
      os << ',' << s.pf.K << ',' << format_double(s.pf.alpha) << ',' << to_string(s.pf.p_kind);
      break;
    }
  }
  os << ',' << s.replicates << ',' << format_double(report.rate) << ',' << format_double(report.se) << ',';
  if (with_timing) os << format_double(std::round(report.seconds * 1000.0) / 1000.0);
  return os.str();
}

}  // namespace pcr
