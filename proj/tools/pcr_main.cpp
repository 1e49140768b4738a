// pcr: command-line front end for the PCR test library.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pcr/core.hpp"
#include "pcr/crt.hpp"
#include "pcr/csv.hpp"
#include "pcr/dataset.hpp"
#include "pcr/errors.hpp"
#include "pcr/parallel.hpp"
#include "pcr/parameter_free.hpp"
#include "pcr/pipeline.hpp"
#include "pcr/power_oracle.hpp"
#include "pcr/report.hpp"
#include "pcr/robust.hpp"
#include "pcr/simlab.hpp"

namespace {

using namespace pcr;

constexpr std::uint64_t kDefaultSeed = 20240601;

enum ExitCode { kOk = 0, kDataError = 1, kUsage = 2 };

struct Common {
  std::uint64_t seed = kDefaultSeed;
  int threads = 0;
  std::string output;
};

struct TestFlags {
  std::string input;
  std::string sampler = "fit";
  std::string score = "residual_linear_z1";
  int L = 5;
  int K = 4;
  double alpha = 0.1;
  std::string threshold = "asym";
  bool random_ties = false;
};

void write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw DataError("write failed for " + path);
}

std::shared_ptr<ConditionalSampler> make_sampler(const std::string& spec, const Dataset& data) {
  if (spec == "fit") return fit_gaussian_linear(data);
  return sampler_from_name(spec);
}

void add_data_flags(CLI::App* cmd, TestFlags& f) {
  cmd->add_option("--input", f.input, "Dataset CSV with header x,y,z1,...,zq")->required();
  cmd->add_option("--sampler", f.sampler,
                  "Conditional law of X given Z: gaussian-linear:<coef file>[:sd], kernel:<model.json>, or "
                  "fit (least squares on the input)")
      ->capture_default_str();
  cmd->add_option("--score", f.score, "residual_linear_z1, sq_loss_xy or ols_residual:<b0>:<b1>")
      ->capture_default_str();
}

void add_pcr_flags(CLI::App* cmd, TestFlags& f) {
  cmd->add_option("--L", f.L, "Number of labels (>= 2)")->capture_default_str();
  cmd->add_option("--K", f.K, "Counterfeit ratio (>= 1)")->capture_default_str();
  cmd->add_option("--alpha", f.alpha, "Significance level")->capture_default_str();
  cmd->add_option("--threshold", f.threshold, "finite or asym")
      ->check(CLI::IsMember({"finite", "asym"}))
      ->capture_default_str();
  cmd->add_flag("--random-ties", f.random_ties, "Break score ties uniformly at random");
}

PcrConfig pcr_config(const TestFlags& f) {
  PcrConfig c;
  c.L = f.L;
  c.K = f.K;
  c.alpha = f.alpha;
  c.threshold_kind = parse_threshold_kind(f.threshold);
  c.ties = f.random_ties ? TieRule::random : TieRule::literal;
  c.validate();
  return c;
}

std::vector<int> parse_grid(const std::string& s) {
  std::vector<int> out;
  for (const auto& cell : split_csv_line(s)) {
    const double v = parse_double(cell);
    if (v != static_cast<int>(v)) throw std::invalid_argument("grid values must be integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

void append_csv_rows(const std::string& path, const std::vector<std::string>& rows) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot open " + path + " for writing");
  if (fresh) out << kExperimentCsvHeader << '\n';
  for (const auto& r : rows) out << r << '\n';
  if (!out) throw DataError("write failed for " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pcr: conditional independence testing with the PCR test"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--seed", common.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--threads", common.threads, "Worker threads (default: PCR_THREADS or all cores)");
  app.add_option("--output,-o", common.output, "Write JSON here instead of stdout");

  TestFlags tf;
  auto* test = app.add_subcommand("test", "Run the PCR test on a dataset; prints a JSON result");
  add_data_flags(test, tf);
  add_pcr_flags(test, tf);

  TestFlags cf;
  int crt_M = 1000;
  std::string crt_sided = "two";
  auto* crt = app.add_subcommand("crt", "Run the conditional randomization test with a summed score");
  add_data_flags(crt, cf);
  crt->add_option("--M", crt_M, "Counterfeit datasets")->capture_default_str();
  crt->add_option("--alpha", cf.alpha, "Significance level")->capture_default_str();
  crt->add_option("--sided", crt_sided, "Decision reported in `reject`: one_lower, one_upper or two")
      ->check(CLI::IsMember({"one_lower", "one_upper", "two"}))
      ->capture_default_str();

  TestFlags pff;
  pff.K = 100;
  std::string grid = "2,4,8,16,32";
  bool shared = false;
  auto* pf = app.add_subcommand("pf", "Parameter-free PCR over a grid of L with Bonferroni combination");
  add_data_flags(pf, pff);
  pf->add_option("--grid", grid, "Comma-separated values of L")->capture_default_str();
  pf->add_option("--K", pff.K, "Counterfeit ratio")->capture_default_str();
  pf->add_option("--alpha", pff.alpha, "Significance level")->capture_default_str();
  pf->add_option("--threshold", pff.threshold, "p-value per L: finite or asym")
      ->check(CLI::IsMember({"finite", "asym"}))
      ->capture_default_str();
  pf->add_flag("--shared", shared, "Reuse one counterfeit set for every L (no Bonferroni guarantee)");

  TestFlags rf;
  double delta = -1.0;
  double eta = 0.0;
  auto* robust = app.add_subcommand("robust", "Robust PCR under a misspecified sampler");
  add_data_flags(robust, rf);
  add_pcr_flags(robust, rf);
  auto* delta_opt = robust->add_option("--delta", delta, "Total-variation budget");
  auto* eta_opt = robust->add_option("--eta", eta, "Use the Pinsker bound for a (1 + eta) scale error");
  delta_opt->excludes(eta_opt);

  ModelSpec om;
  std::string om_id = "quadratic_shift";
  int o_L = 5, o_K = 100, zy_samples = 0;
  double o_alpha = 0.1, o_beta = 0.2;
  auto* oracle = app.add_subcommand("oracle", "Power oracle for a built-in model; prints a JSON PowerReport");
  oracle->add_option("--model", om_id, "Model id")
      ->check(CLI::IsMember({"crt_failure_example", "theta_family", "quadratic_null", "quadratic_shift",
                             "quadratic_a", "robust_mismatch"}))
      ->capture_default_str();
  oracle->add_option("--theta", om.theta, "theta for the CRT-failure models")->capture_default_str();
  oracle->add_option("--a", om.a, "Effect size for quadratic_a and robust_mismatch")->capture_default_str();
  oracle->add_option("--eta", om.eta, "Counterfeit scale error for robust_mismatch")->capture_default_str();
  oracle->add_option("--p-dim", om.p_dim, "Dimension of Z")->capture_default_str();
  oracle->add_option("--n", om.n, "Sample size used by the bounds")->capture_default_str();
  oracle->add_option("--L", o_L, "Number of labels")->capture_default_str();
  oracle->add_option("--K", o_K, "Counterfeit ratio")->capture_default_str();
  oracle->add_option("--alpha", o_alpha, "Significance level")->capture_default_str();
  oracle->add_option("--beta", o_beta, "Type II error target for the predicates")->capture_default_str();
  oracle->add_option("--zy-samples", zy_samples, "Monte Carlo (z, y) draws; 0 uses quadrature")
      ->capture_default_str();

  std::string config, csv_out, json_out;
  bool timing = false;
  int replicates = 0;
  auto* simulate = app.add_subcommand("simulate", "Run experiments from a JSON config; prints CSV rows");
  simulate->add_option("--config", config, "JSON file: one experiment or {\"experiments\": [...]}")->required();
  simulate->add_option("--csv", csv_out, "Append rows to this CSV (header written if new)");
  simulate->add_option("--json", json_out, "Write full reports as a JSON array");
  simulate->add_option("--replicates", replicates, "Override the replicate count of every experiment");
  simulate->add_flag("--timing", timing, "Fill the seconds column");

  std::string test_csv, train_csv;
  std::vector<std::string> responses = {"user_type", "date", "weekday"};
  PipelineConfig pc;
  std::string pc_threshold = "finite";
  std::string save_model;
  auto* pipeline = app.add_subcommand("pipeline", "Trip-duration workflow with grouped PCR; prints JSON");
  pipeline->add_option("--test", test_csv, "Test trips CSV")->required();
  pipeline->add_option("--train", train_csv, "Training trips CSV")->required();
  pipeline->add_option("--response", responses, "user_type, date and/or weekday")
      ->check(CLI::IsMember({"user_type", "date", "weekday"}))
      ->capture_default_str();
  pipeline->add_option("--group-size", pc.grouped.group_size, "Samples per group")->capture_default_str();
  pipeline->add_option("--L", pc.grouped.L, "Number of labels")->capture_default_str();
  pipeline->add_option("--K", pc.grouped.K, "Counterfeit ratio")->capture_default_str();
  pipeline->add_option("--alpha", pc.grouped.alpha, "Significance level")->capture_default_str();
  pipeline->add_option("--threshold", pc_threshold, "Threshold used for `reject`")
      ->check(CLI::IsMember({"finite", "asym"}))
      ->capture_default_str();
  pipeline->add_option("--bandwidth", pc.bandwidth_minutes, "Kernel bandwidth in minutes")->capture_default_str();
  pipeline->add_option("--min-count", pc.min_route_count, "Minimum training rides per route")
      ->capture_default_str();
  pipeline->add_option("--save-model", save_model, "Write the fitted kernel model (for kernel:<file>)");

  TripFixtureSpec fx;
  fx.route_counts = {5, 19, 20};
  fx.route_counts.resize(38, 4000);
  fx.test_per_route = 200;
  std::string fx_train = "train.csv", fx_test = "test.csv";
  auto* fixture = app.add_subcommand("fixture", "Write synthetic trip CSVs in the pipeline schema");
  fixture->add_option("--train-out", fx_train, "Training CSV path")->capture_default_str();
  fixture->add_option("--test-out", fx_test, "Test CSV path")->capture_default_str();
  fixture->add_option("--planted", fx.planted_effect, "Extra minutes for members")->capture_default_str();
  fixture->add_option("--test-per-route", fx.test_per_route, "Test rides per route")->capture_default_str();
  fixture->add_option("--route-counts", fx.route_counts, "Training rides per route")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    set_thread_count(common.threads);

    if (test->parsed()) {
      const auto cfg = pcr_config(tf);
      const auto score = score_from_spec(tf.score);
      const auto data = read_dataset_csv(tf.input);
      const auto sampler = make_sampler(tf.sampler, data);
      write_output(dump_json(to_json(run_pcr(data, *sampler, *score, cfg, common.seed))), common.output);
    } else if (crt->parsed()) {
      if (!(cf.alpha > 0.0 && cf.alpha < 1.0)) throw std::domain_error("alpha must lie in (0, 1)");
      if (crt_M < 1) throw std::domain_error("M must be at least 1");
      const auto score = score_from_spec(cf.score);
      const auto data = read_dataset_csv(cf.input);
      const auto sampler = make_sampler(cf.sampler, data);
      const auto res = run_crt(data, *sampler, SummedSampleScore(score), crt_M, cf.alpha, common.seed);
      Json j = to_json(res);
      j["sided"] = crt_sided;
      j["reject"] = crt_decide(res.p, cf.alpha, parse_sidedness(crt_sided));
      write_output(dump_json(j), common.output);
    } else if (pf->parsed()) {
      PfConfig cfg;
      cfg.grid = parse_grid(grid);
      cfg.K = pff.K;
      cfg.alpha = pff.alpha;
      cfg.p_kind = parse_threshold_kind(pff.threshold);
      cfg.shared_counterfeits = shared;
      cfg.validate();
      const auto score = score_from_spec(pff.score);
      const auto data = read_dataset_csv(pff.input);
      const auto sampler = make_sampler(pff.sampler, data);
      write_output(dump_json(to_json(run_parameter_free(data, *sampler, *score, cfg, common.seed))),
                   common.output);
    } else if (robust->parsed()) {
      RobustConfig cfg;
      cfg.pcr = pcr_config(rf);
      cfg.delta = eta_opt->count() ? pinsker_delta_gaussian(eta) : (delta_opt->count() ? delta : 0.0);
      cfg.validate();
      const auto score = score_from_spec(rf.score);
      const auto data = read_dataset_csv(rf.input);
      const auto sampler = make_sampler(rf.sampler, data);
      write_output(dump_json(to_json(run_robust_pcr(data, *sampler, *score, cfg, common.seed))), common.output);
    } else if (oracle->parsed()) {
      om.id = parse_model_id(om_id);
      om.validate();
      const auto coeffs = draw_coefficients(om, common.seed);
      const auto model = make_odc_model(om, coeffs);
      const auto grid_u = default_odc_grid();
      const OdcCurve curve = zy_samples > 0
                                 ? conditional_odc(*model, grid_u, static_cast<std::size_t>(zy_samples), common.seed)
                                 : conditional_odc_quadrature(*model, grid_u);
      PowerReport rep = power_report(curve, static_cast<double>(om.n), o_L, o_K, o_alpha, o_beta);
      if (!om.is_quadratic()) {
        const CrtFailureOdcModel crt_model(om.theta);
        rep.eta = crt_eta([&](double x) { return crt_model.g(x); }).eta;
      }
      Json j;
      j["model"] = to_json(om);
      if (om.is_quadratic()) {
        j["u"] = coeffs.u;
        j["v"] = coeffs.v;
      }
      j["L"] = o_L;
      j["K"] = o_K;
      j["alpha"] = o_alpha;
      j["beta"] = o_beta;
      j["report"] = to_json(rep);
      write_output(dump_json(j), common.output);
    } else if (simulate->parsed()) {
      auto specs = read_experiment_config(config);
      std::vector<std::string> rows;
      Json reports = Json::array();
      for (auto& s : specs) {
        if (replicates > 0) s.replicates = replicates;
        const auto rep = run_experiment(s);
        rows.push_back(experiment_csv_row(rep, timing));
        reports.push_back(to_json(rep, true));
      }
      if (!csv_out.empty()) {
        append_csv_rows(csv_out, rows);
      } else {
        std::cout << kExperimentCsvHeader << '\n';
        for (const auto& r : rows) std::cout << r << '\n';
      }
      if (!json_out.empty()) write_output(dump_json(reports), json_out);
    } else if (pipeline->parsed()) {
      pc.grouped.threshold_kind = parse_threshold_kind(pc_threshold);
      std::vector<TripResponse> rs;
      for (const auto& r : responses) rs.push_back(parse_trip_response(r));
      std::vector<std::string> warnings;
      const auto test_records = load_trips(test_csv, &warnings);
      const auto train_records = load_trips(train_csv, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      if (!save_model.empty()) kernel_fit(train_records, pc.bandwidth_minutes).save(save_model);
      const auto rep = run_pipeline(test_records, train_records, rs, pc, common.seed);
      write_output(dump_json(to_json(rep)), common.output);
    } else if (fixture->parsed()) {
      const auto data = make_trip_fixture(fx, common.seed);
      write_trips_csv(data.train, fx_train);
      write_trips_csv(data.test, fx_test);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}
