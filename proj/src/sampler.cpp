#include "pcr/sampler.hpp"

#include <Eigen/Dense>
#include <fstream>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pcr/csv.hpp"
#include "pcr/dataset.hpp"
#include "pcr/errors.hpp"

namespace pcr {

void ConditionalSampler::draw_many(std::span<const double> z, RngStream& rng, std::span<double> out) const {
  for (double& v : out) v = draw(z, rng);
}

GaussianLinearSampler::GaussianLinearSampler(std::vector<double> v, double sd, double intercept)
    : v_(std::move(v)), sd_(sd), intercept_(intercept) {
  if (!(sd_ > 0.0)) throw std::domain_error("GaussianLinearSampler: sd must be positive");
}

double GaussianLinearSampler::mean(std::span<const double> z) const {
  if (z.size() != v_.size()) {
    throw DataError("sampler expects " + std::to_string(v_.size()) + " covariates, got " + std::to_string(z.size()));
  }
  double m = intercept_;
  for (std::size_t k = 0; k < v_.size(); ++k) m += v_[k] * z[k];
  return m;
}

double GaussianLinearSampler::draw(std::span<const double> z, RngStream& rng) const {
  return mean(z) + sd_ * rng.normal();
}

void GaussianLinearSampler::draw_many(std::span<const double> z, RngStream& rng, std::span<double> out) const {
  const double m = mean(z);
  for (double& v : out) v = m + sd_ * rng.normal();
}

std::string GaussianLinearSampler::descriptor() const {
  std::ostringstream os;
  os << "gaussian-linear(q=" << v_.size() << ",sd=" << format_double(sd_) << ")";
  return os.str();
}

std::shared_ptr<GaussianLinearSampler> fit_gaussian_linear(const Dataset& data) {
  data.validate();
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto q = static_cast<Eigen::Index>(data.q);
  if (n <= q + 1) throw DataError("fit: need more samples than covariates + 1");
  Eigen::MatrixXd design(n, q + 1);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (Eigen::Index k = 0; k < q; ++k) design(i, k + 1) = data.z[static_cast<std::size_t>(i * q + k)];
    x(i) = data.x[static_cast<std::size_t>(i)];
  }
  const auto qr = design.colPivHouseholderQr();
  if (qr.rank() < q + 1) throw DataError("fit: covariates are collinear");
  const Eigen::VectorXd beta = qr.solve(x);
  const double rss = (x - design * beta).squaredNorm();
  const double sd = std::sqrt(rss / static_cast<double>(n - q - 1));
  if (!(sd > 0.0)) throw DataError("fit: x is an exact linear function of z");
  std::vector<double> v(beta.data() + 1, beta.data() + beta.size());
  return std::make_shared<GaussianLinearSampler>(std::move(v), sd, beta(0));
}

std::shared_ptr<ConditionalSampler> sampler_from_spec(const std::string& spec) {
  const std::string prefix = "gaussian-linear:";
  if (spec.rfind(prefix, 0) != 0) {
    throw std::invalid_argument("unknown sampler '" + spec + "' (expected gaussian-linear:<file>[:sd])");
  }
  std::string rest = spec.substr(prefix.size());
  double sd = 1.0;
  const auto colon = rest.rfind(':');
  if (colon != std::string::npos) {
    sd = parse_double(rest.substr(colon + 1));
    rest = rest.substr(0, colon);
  }
  std::ifstream in(rest);
  if (!in) throw DataError("cannot open coefficient file " + rest);
  std::vector<double> v;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    try {
      for (const auto& c : cells) {
        if (!c.empty()) v.push_back(parse_double(c));
      }
    } catch (const DataError&) {
      if (!first) throw;
    }
    first = false;
  }
  return std::make_shared<GaussianLinearSampler>(std::move(v), sd);
}

}  // namespace pcr
