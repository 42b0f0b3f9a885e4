#include <cmath>

#include "deuq/rng.hpp"
#include "deuq/uq.hpp"

namespace deuq {

PredictiveBand posterior_predictive_mc(const VariationalParams& q, const Eigen::MatrixXd& grid,
                                       std::size_t n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw ConfigError("posterior predictive needs at least 2 samples");
  const auto n_out = static_cast<Eigen::Index>(q.net.output_dim);
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n_out, grid.cols());
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(n_out, grid.cols());
  std::vector<double> noise(q.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  MLPTrace trace;
  const JetBatch input = JetBatch::seeded(grid, std::nullopt);
  // Welford's running mean and sum of squared deviations.
  for (std::size_t k = 0; k < n_samples; ++k) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
    normal.reset();
    for (double& e : noise) e = normal(rng);
    const MLPParams w = bbb_sample_weights(q, noise);
    const Eigen::MatrixXd& y = trace.forward(q.net, w, input, false).value;
    const Eigen::MatrixXd delta = y - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta.cwiseProduct(y - mean);
  }
  PredictiveBand band;
  band.grid = grid;
  band.mean = mean;
  band.std = (m2 / static_cast<double>(n_samples - 1)).cwiseMax(0.0).cwiseSqrt();
  return band;
}

PredictiveBand enforce_predictive(const PredictiveBand& band, const Transform& transform) {
  if (band.enforced) throw StructuralError("band is already enforced");
  Eigen::MatrixXd A, B;
  transform.values(band.grid, A, B);
  if (A.rows() != band.mean.rows()) throw StructuralError("transform outputs do not match the band");
  PredictiveBand out = band;
  out.mean = A + B.cwiseProduct(band.mean);
  out.std = B.cwiseAbs().cwiseProduct(band.std);
  out.enforced = true;
  return out;
}

}  // namespace deuq
