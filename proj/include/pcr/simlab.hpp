#pragma once

// Synthetic models and the replicated-experiment runner.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcr/core.hpp"
#include "pcr/crt.hpp"
#include "pcr/dataset.hpp"
#include "pcr/parameter_free.hpp"
#include "pcr/power_oracle.hpp"
#include "pcr/sampler.hpp"
#include "pcr/score.hpp"

namespace pcr {

enum class ModelId { crt_failure_example, theta_family, quadratic_null, quadratic_shift, quadratic_a, robust_mismatch };

std::string to_string(ModelId id);
ModelId parse_model_id(const std::string& s);

// crt_failure_example / theta_family: Z empty, X ~ N(0,1), Y = 1/sqrt(theta^2 + X^2) + eps.
// quadratic_*: Z ~ N(0, I_p), X | Z ~ N(v'Z, 1), Y = (u'Z)^2 + a X + eps, with a = 0
// (null), 2 (shift) or the given a. robust_mismatch adds an approximate sampler
// N(v'Z, (1 + eta)^2) that the tests use for counterfeits.
struct ModelSpec {
  ModelId id = ModelId::quadratic_null;
  double theta = 1e-3;
  double a = 0.0;
  double eta = 0.0;
  int p_dim = 20;
  std::size_t n = 100;

  void validate() const;
  double effective_a() const;
  bool is_quadratic() const;
};

struct ModelCoefficients {
  std::vector<double> u;
  std::vector<double> v;
};

// u then v, i.i.d. N(0,1), from the stream (seed, "coeffs").
ModelCoefficients draw_coefficients(const ModelSpec& spec, std::uint64_t seed);

struct GeneratedData {
  Dataset data;
  std::shared_ptr<const ConditionalSampler> true_sampler;
  std::shared_ptr<const ConditionalSampler> approx_sampler;  // robust_mismatch only

  const ConditionalSampler& counterfeit_sampler() const { return approx_sampler ? *approx_sampler : *true_sampler; }
};

GeneratedData gen_dataset(const ModelSpec& spec, const ModelCoefficients& coeffs, RngStream& rng);

// Oracle model for the same law; robust_mismatch uses the approximate sampler
// for counterfeits. All quadratic models assume the residual_linear_z1 score
// and the CRT-failure models the sq_loss_xy score.
std::unique_ptr<OdcModel> make_odc_model(const ModelSpec& spec, const ModelCoefficients& coeffs);

// Default score for each model family. for each model family.
std::string default_score_name(ModelId id);

enum class TestKind { pcr, crt, pf_pcr, robust_pcr };
std::string to_string(TestKind kind);
TestKind parse_test_kind(const std::string& s);
std::string to_string(Sidedness s);
Sidedness parse_sidedness(const std::string& s);

struct ExperimentSpec {
  std::string name = "experiment";
  ModelSpec model;
  TestKind test = TestKind::pcr;
  std::string score;  // empty: default_score_name(model.id)
  PcrConfig pcr;      // L, K, alpha, threshold for pcr / robust_pcr; alpha for crt
  int crt_M = 1000;
  Sidedness crt_sided = Sidedness::two;
  PfConfig pf;
  std::optional<double> delta;  // robust_pcr; unset means the Pinsker bound for model.eta
  int replicates = 2000;
  std::uint64_t seed = 20240601;

  void validate() const;
  double robust_delta() const;
};

// One replicate. `statistic` is U (pcr, robust), the CRT p-value, or P* (pf_pcr).
struct ReplicateOutcome {
  bool reject = false;
  double statistic = 0.0;
  double p_finite = 1.0;
  double p_asym = 1.0;
  double plain_statistic = 0.0;  // robust_pcr: U without the delta adjustment
};

struct ExperimentReport {
  ExperimentSpec spec;
  ModelCoefficients coefficients;
  std::uint64_t rejections = 0;
  double rate = 0.0;
  double se = 0.0;
  double seconds = 0.0;
  std::vector<ReplicateOutcome> replicates;
};

// Replicate r draws its dataset from stream (seed, ("data", r)) and runs the
// test with seed stream_key({seed, r}); replicates run in parallel.
ExperimentReport run_experiment(const ExperimentSpec& spec);

// Rate and standard error of a rejection count.
double rejection_se(double rate, int replicates);

inline constexpr const char* kExperimentCsvHeader = "experiment,model,test,L,K,alpha,threshold,replicates,rate,se,seconds";

// One CSV row; the seconds column is left empty unless `with_timing`.
std::string experiment_csv_row(const ExperimentReport& report, bool with_timing);

}  // namespace pcr
