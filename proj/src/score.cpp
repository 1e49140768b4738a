#include "pcr/score.hpp"

#include <stdexcept>

#include "pcr/csv.hpp"

namespace pcr {

namespace {

double sum_of(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += v;
  return s;
}

}  // namespace

void ScoreFunction::score_many(std::span<const double> xs, double y, std::span<const double> z,
                               std::span<double> out) const {
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = score(xs[i], y, z);
}

double ResidualLinearZ1Score::score(double x, double y, std::span<const double> z) const {
  const double r = y - x - sum_of(z);
  return r * r;
}

void ResidualLinearZ1Score::score_many(std::span<const double> xs, double y, std::span<const double> z,
                                       std::span<double> out) const {
  const double base = y - sum_of(z);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = base - xs[i];
    out[i] = r * r;
  }
}

double SquaredLossScore::score(double x, double y, std::span<const double>) const {
  const double r = y - x;
  return r * r;
}

double OlsResidualScore::score(double x, double y, std::span<const double>) const {
  const double r = y - b0_ - b1_ * x;
  return r * r;
}

std::string OlsResidualScore::descriptor() const {
  return "ols_residual(" + format_double(b0_) + "," + format_double(b1_) + ")";
}

std::shared_ptr<ScoreFunction> score_builtin(const std::string& name, double b0, double b1) {
  if (name == "residual_linear_z1") return std::make_shared<ResidualLinearZ1Score>();
  if (name == "sq_loss_xy") return std::make_shared<SquaredLossScore>();
  if (name == "ols_residual") return std::make_shared<OlsResidualScore>(b0, b1);
  throw std::invalid_argument("unknown score '" + name + "'");
}

std::shared_ptr<ScoreFunction> score_from_spec(const std::string& spec) {
  const std::string ols = "ols_residual:";
  if (spec.rfind(ols, 0) == 0) {
    const std::string rest = spec.substr(ols.size());
    const auto colon = rest.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("expected ols_residual:<b0>:<b1>");
    return score_builtin("ols_residual", parse_double(rest.substr(0, colon)), parse_double(rest.substr(colon + 1)));
  }
  return score_builtin(spec);
}

}  // namespace pcr
