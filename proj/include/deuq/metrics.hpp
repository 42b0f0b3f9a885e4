#pragma once

// Band quality: coverage of a reference, growth of the predictive std outside
// the training domain, fit error.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "deuq/problems.hpp"
#include "deuq/uq.hpp"

namespace deuq {

struct BandReport {
  double coverage_k2 = 0.0;
  double mean_std_train = 0.0;
  double mean_std_extrap = 0.0;
  double inflation_ratio = 0.0;  // +infinity when mean_std_train is 0
  double rmse_train = 0.0;
};

// Fraction of entries with |mean - reference| <= k * std. Shapes must match
// (StructuralError otherwise); k must be positive (ConfigError).
double coverage(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& std, const Eigen::MatrixXd& reference,
                double k);
double coverage(const PredictiveBand& band, const Eigen::MatrixXd& reference, double k);

// Mean std over grid points strictly outside the training domain (and inside
// the extrapolation domain) divided by the mean std over points inside it.
// StructuralError when either region has no points.
double inflation_ratio(const PredictiveBand& band, const std::vector<Interval>& train_domain,
                       const std::vector<Interval>& extrap_domain);

// Root mean squared deviation. StructuralError for empty or unequal inputs.
double rmse(std::span<const double> values, std::span<const double> reference);

// Metrics for an enforced band against the reference solution on the same
// grid. Coverage uses k = 2 over the training-domain points; rmse compares
// the band mean with the reference there.
BandReport band_report(const ProblemSpec& problem, const PredictiveBand& band, const Eigen::MatrixXd& reference);

}  // namespace deuq
