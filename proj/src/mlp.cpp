#include "deuq/mlp.hpp"

#include <cmath>

#include "deuq/rng.hpp"

namespace deuq {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "sin"; }

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "sin") return Activation::Sin;
  throw ConfigError("unknown activation '" + name + "' (valid: tanh, sin)");
}

void MLPConfig::validate() const {
  if (input_dim != 1 && input_dim != 2) throw ConfigError("input_dim must be 1 or 2");
  if (output_dim == 0) throw ConfigError("output_dim must be positive");
  if (hidden_sizes.empty() || hidden_sizes.size() > 3) {
    throw ConfigError("hidden_sizes must list one to three layers");
  }
  for (std::size_t h : hidden_sizes) {
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
  }
}

std::vector<std::size_t> MLPConfig::widths() const {
  std::vector<std::size_t> w{input_dim};
  w.insert(w.end(), hidden_sizes.begin(), hidden_sizes.end());
  w.push_back(output_dim);
  return w;
}

std::size_t MLPConfig::param_count() const {
  const auto w = widths();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) n += w[l + 1] * w[l] + w[l + 1];
  return n;
}

std::size_t MLPParams::size() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

bool MLPParams::all_finite() const {
  for (const auto& layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

Eigen::VectorXd MLPParams::flatten() const {
  Eigen::VectorXd flat(size());
  Eigen::Index k = 0;
  for (const auto& layer : layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) flat[k++] = layer.weight(r, c);
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) flat[k++] = layer.bias[r];
  }
  return flat;
}

MLPParams MLPParams::zeros(const MLPConfig& config) {
  const auto w = config.widths();
  MLPParams p;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(w[l + 1]);
    const auto in = static_cast<Eigen::Index>(w[l]);
    p.layers.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  return p;
}

MLPParams MLPParams::unflatten(const MLPConfig& config, std::span<const double> flat) {
  if (flat.size() != config.param_count()) throw StructuralError("flat parameter size mismatch");
  MLPParams p = zeros(config);
  std::size_t k = 0;
  for (auto& layer : p.layers) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = flat[k++];
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = flat[k++];
  }
  return p;
}

MLPParams init(const MLPConfig& config) {
  config.validate();
  MLPParams p = MLPParams::zeros(config);
  Rng rng(config.seed);
  for (auto& layer : p.layers) {
    const double fan = static_cast<double>(layer.weight.rows() + layer.weight.cols());
    std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan), std::sqrt(6.0 / fan));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
    }
  }
  return p;
}

ActivationDerivs activation_derivs(Activation act, const Eigen::ArrayXXd& z) {
  ActivationDerivs out;
  if (act == Activation::Tanh) {
    out.f = z.tanh();
    out.d1 = 1.0 - out.f.square();
    out.d2 = -2.0 * out.f * out.d1;
    out.d3 = -2.0 * out.d1.square() + 4.0 * out.f.square() * out.d1;
  } else {
    out.f = z.sin();
    out.d1 = z.cos();
    out.d2 = -out.f;
    out.d3 = -out.d1;
  }
  return out;
}

std::vector<Jet> forward(const MLPConfig& config, const MLPParams& params,
                         std::span<const Jet> input) {
  if (input.size() != config.input_dim) throw StructuralError("network input size mismatch");
  const Eigen::VectorXd flat = params.flatten();
  return forward<double>(config, std::span<const double>(flat.data(), flat.size()), input);
}

JetBatch JetBatch::zeros(Eigen::Index rows, Eigen::Index cols) {
  return {Eigen::MatrixXd::Zero(rows, cols), Eigen::MatrixXd::Zero(rows, cols),
          Eigen::MatrixXd::Zero(rows, cols)};
}

JetBatch JetBatch::seeded(const Eigen::MatrixXd& points, std::optional<std::size_t> axis) {
  JetBatch b = zeros(points.rows(), points.cols());
  b.value = points;
  if (axis) {
    if (static_cast<Eigen::Index>(*axis) >= points.rows()) {
      throw StructuralError("seeded axis out of range");
    }
    b.d1.row(static_cast<Eigen::Index>(*axis)).setOnes();
  }
  return b;
}

const JetBatch& MLPTrace::forward(const MLPConfig& config, const MLPParams& params,
                                  const JetBatch& input, bool derivs) {
  if (static_cast<std::size_t>(input.value.rows()) != config.input_dim) {
    throw StructuralError("network input size mismatch");
  }
  activation_ = config.activation;
  derivs_ = derivs;
  acts_.assign(1, input);
  pre_.clear();
  const std::size_t n_layers = params.layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const DenseLayer& layer = params.layers[l];
    const JetBatch& x = acts_.back();
    JetBatch z;
    z.value = (layer.weight * x.value).colwise() + layer.bias;
    if (derivs) {
      z.d1 = layer.weight * x.d1;
      z.d2 = layer.weight * x.d2;
    }
    if (l + 1 == n_layers) {
      acts_.push_back(std::move(z));
      break;
    }
    const ActivationDerivs a = activation_derivs(activation_, z.value.array());
    JetBatch h;
    h.value = a.f.matrix();
    if (derivs) {
      h.d1 = (a.d1 * z.d1.array()).matrix();
      h.d2 = (a.d2 * z.d1.array().square() + a.d1 * z.d2.array()).matrix();
    }
    pre_.push_back(std::move(z));
    acts_.push_back(std::move(h));
  }
  return acts_.back();
}

Eigen::VectorXd MLPTrace::backward(const MLPParams& params, const JetBatch& output_adjoint) const {
  const std::size_t n_layers = params.layers.size();
  if (acts_.size() != n_layers + 1) throw StructuralError("backward called before forward");
  std::vector<Eigen::MatrixXd> grad_w(n_layers);
  std::vector<Eigen::VectorXd> grad_b(n_layers);
  JetBatch zbar = output_adjoint;
  for (std::size_t l = n_layers; l-- > 0;) {
    const DenseLayer& layer = params.layers[l];
    const JetBatch& x = acts_[l];
    grad_w[l] = zbar.value * x.value.transpose();
    if (derivs_) grad_w[l] += zbar.d1 * x.d1.transpose() + zbar.d2 * x.d2.transpose();
    grad_b[l] = zbar.value.rowwise().sum();
    if (l == 0) break;

    JetBatch hbar;
    hbar.value = layer.weight.transpose() * zbar.value;
    if (derivs_) {
      hbar.d1 = layer.weight.transpose() * zbar.d1;
      hbar.d2 = layer.weight.transpose() * zbar.d2;
    }
    const JetBatch& z = pre_[l - 1];
    const ActivationDerivs a = activation_derivs(activation_, z.value.array());
    JetBatch next;
    if (derivs_) {
      const Eigen::ArrayXXd z1 = z.d1.array();
      const Eigen::ArrayXXd h1 = hbar.d1.array();
      const Eigen::ArrayXXd h2 = hbar.d2.array();
      next.d2 = (h2 * a.d1).matrix();
      next.d1 = (h1 * a.d1 + 2.0 * h2 * a.d2 * z1).matrix();
      next.value = (hbar.value.array() * a.d1 + h1 * a.d2 * z1 +
                    h2 * (a.d3 * z1.square() + a.d2 * z.d2.array()))
                       .matrix();
    } else {
      next.value = (hbar.value.array() * a.d1).matrix();
    }
    zbar = std::move(next);
  }

  Eigen::VectorXd flat(params.size());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    for (Eigen::Index r = 0; r < grad_w[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < grad_w[l].cols(); ++c) flat[k++] = grad_w[l](r, c);
    }
    flat.segment(k, grad_b[l].size()) = grad_b[l];
    k += grad_b[l].size();
  }
  return flat;
}

Eigen::MatrixXd evaluate(const MLPConfig& config, const MLPParams& params,
                         const Eigen::MatrixXd& points) {
  MLPTrace trace;
  return trace.forward(config, params, JetBatch::seeded(points, std::nullopt), false).value;
}

Eigen::MatrixXd hidden_features(const MLPConfig& config, const MLPParams& params,
                                const Eigen::MatrixXd& points) {
  MLPTrace trace;
  trace.forward(config, params, JetBatch::seeded(points, std::nullopt), false);
  return trace.last_hidden().value;
}

}  // namespace deuq
