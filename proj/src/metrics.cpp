#include "deuq/metrics.hpp"

#include <cmath>
#include <limits>

namespace deuq {

namespace {

bool inside(const std::vector<Interval>& domain, const Eigen::MatrixXd& grid, Eigen::Index j) {
  for (std::size_t d = 0; d < domain.size(); ++d) {
    if (!domain[d].contains(grid(static_cast<Eigen::Index>(d), j))) return false;
  }
  return true;
}

void check_grid(const PredictiveBand& band, const std::vector<Interval>& domain) {
  if (band.grid.rows() != static_cast<Eigen::Index>(domain.size())) {
    throw StructuralError("band grid dimension does not match the domain");
  }
  if (band.std.cols() != band.grid.cols()) throw StructuralError("band std does not match its grid");
}

}  // namespace

double coverage(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& std, const Eigen::MatrixXd& reference,
                double k) {
  if (!(k > 0.0)) throw ConfigError("coverage needs k > 0");
  if (mean.rows() != reference.rows() || mean.cols() != reference.cols() || std.rows() != mean.rows() ||
      std.cols() != mean.cols()) {
    throw StructuralError("band and reference grids do not align");
  }
  if (mean.size() == 0) throw StructuralError("coverage of an empty band");
  const auto hits = ((mean - reference).array().abs() <= k * std.array()).count();
  return static_cast<double>(hits) / static_cast<double>(mean.size());
}

double coverage(const PredictiveBand& band, const Eigen::MatrixXd& reference, double k) {
  return coverage(band.mean, band.std, reference, k);
}

double inflation_ratio(const PredictiveBand& band, const std::vector<Interval>& train_domain,
                       const std::vector<Interval>& extrap_domain) {
  check_grid(band, train_domain);
  check_grid(band, extrap_domain);
  double sum_in = 0.0, sum_out = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (Eigen::Index j = 0; j < band.grid.cols(); ++j) {
    const double s = band.std.col(j).sum();
    const auto k = static_cast<std::size_t>(band.std.rows());
    if (inside(train_domain, band.grid, j)) {
      sum_in += s;
      n_in += k;
    } else if (inside(extrap_domain, band.grid, j)) {
      sum_out += s;
      n_out += k;
    }
  }
  if (n_in == 0 || n_out == 0) throw StructuralError("band must cover both the training and extrapolation regions");
  const double train = sum_in / static_cast<double>(n_in);
  const double extrap = sum_out / static_cast<double>(n_out);
  if (train == 0.0) return std::numeric_limits<double>::infinity();
  return extrap / train;
}

double rmse(std::span<const double> values, std::span<const double> reference) {
  if (values.empty()) throw StructuralError("rmse of an empty vector");
  if (values.size() != reference.size()) throw StructuralError("rmse inputs differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - reference[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(values.size()));
}

BandReport band_report(const ProblemSpec& problem, const PredictiveBand& band, const Eigen::MatrixXd& reference) {
  check_grid(band, problem.train_domain);
  if (reference.rows() != band.mean.rows() || reference.cols() != band.mean.cols()) {
    throw StructuralError("band and reference grids do not align");
  }
  std::vector<Eigen::Index> in, out;
  for (Eigen::Index j = 0; j < band.grid.cols(); ++j) {
    if (inside(problem.train_domain, band.grid, j)) {
      in.push_back(j);
    } else if (inside(problem.extrap_domain, band.grid, j)) {
      out.push_back(j);
    }
  }
  if (in.empty() || out.empty()) throw StructuralError("band must cover both the training and extrapolation regions");

  const Eigen::MatrixXd mean_in = band.mean(Eigen::all, in);
  const Eigen::MatrixXd std_in = band.std(Eigen::all, in);
  const Eigen::MatrixXd ref_in = reference(Eigen::all, in);

  BandReport r;
  r.coverage_k2 = coverage(mean_in, std_in, ref_in, 2.0);
  r.mean_std_train = std_in.mean();
  r.mean_std_extrap = band.std(Eigen::all, out).mean();
  r.inflation_ratio = inflation_ratio(band, problem.train_domain, problem.extrap_domain);
  r.rmse_train = rmse(std::span<const double>(mean_in.data(), static_cast<std::size_t>(mean_in.size())),
                      std::span<const double>(ref_in.data(), static_cast<std::size_t>(ref_in.size())));
  return r;
}

}  // namespace deuq
