#pragma once

// Dense feed-forward networks evaluated on jets.
//
// Flat parameter ordering (used by every gradient vector in the library):
// layer-major from input to output; within a layer the weight matrix comes
// first in row-major order (row = output unit), followed by the bias vector.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "deuq/errors.hpp"
#include "deuq/jet.hpp"

namespace deuq {

enum class Activation { Tanh, Sin };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

struct MLPConfig {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::vector<std::size_t> hidden_sizes{32};
  Activation activation = Activation::Tanh;
  std::uint64_t seed = 0;

  // Throws ConfigError unless input_dim is 1 or 2, output_dim > 0 and there
  // are one to three positive hidden widths.
  void validate() const;
  std::size_t param_count() const;
  // Width of every layer including input and output.
  std::vector<std::size_t> widths() const;

  bool operator==(const MLPConfig&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

struct MLPParams {
  std::vector<DenseLayer> layers;

  std::size_t size() const;
  bool all_finite() const;
  Eigen::VectorXd flatten() const;
  static MLPParams unflatten(const MLPConfig& config, std::span<const double> flat);
  static MLPParams zeros(const MLPConfig& config);
};

MLPParams init(const MLPConfig& config);

// Activation value and its first three derivatives, elementwise.
struct ActivationDerivs {
  Eigen::ArrayXXd f, d1, d2, d3;
};
ActivationDerivs activation_derivs(Activation act, const Eigen::ArrayXXd& z);

// Single-point forward over double jets. Input length must equal input_dim.
std::vector<Jet> forward(const MLPConfig& config, const MLPParams& params,
                         std::span<const Jet> input);

// Generic single-point forward with parameters supplied as a flat vector of
// T (e.g. tape variables). Used for reference gradients.
template <class T>
std::vector<Jet2<T>> forward(const MLPConfig& config, std::span<const T> flat,
                             std::span<const Jet2<T>> input) {
  if (input.size() != config.input_dim) throw StructuralError("network input size mismatch");
  if (flat.size() != config.param_count()) throw StructuralError("parameter count mismatch");
  const std::vector<std::size_t> w = config.widths();
  std::vector<Jet2<T>> x(input.begin(), input.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const std::size_t in = w[l];
    const std::size_t out = w[l + 1];
    const bool last = l + 2 == w.size();
    std::vector<Jet2<T>> y(out);
    for (std::size_t r = 0; r < out; ++r) {
      Jet2<T> acc(flat[offset + out * in + r]);
      for (std::size_t c = 0; c < in; ++c) acc = acc + flat[offset + r * in + c] * x[c];
      if (!last) acc = config.activation == Activation::Tanh ? tanh(acc) : sin(acc);
      y[r] = acc;
    }
    offset += out * in + out;
    x = std::move(y);
  }
  return x;
}

// Jets for a batch of points. Rows are features/units, columns are points.
struct JetBatch {
  Eigen::MatrixXd value;
  Eigen::MatrixXd d1;
  Eigen::MatrixXd d2;

  // Inputs with the given axis seeded (d1 = 1); no axis means all constant.
  static JetBatch seeded(const Eigen::MatrixXd& points, std::optional<std::size_t> axis);
  static JetBatch zeros(Eigen::Index rows, Eigen::Index cols);
};

// Batched forward pass that keeps what the reverse sweep needs.
class MLPTrace {
 public:
  // With `derivs` false only the value channel is propagated.
  const JetBatch& forward(const MLPConfig& config, const MLPParams& params, const JetBatch& input,
                          bool derivs);

  // Flat parameter gradient given adjoints of the output jets.
  Eigen::VectorXd backward(const MLPParams& params, const JetBatch& output_adjoint) const;

  const JetBatch& output() const { return acts_.back(); }
  // Activations of the last hidden layer.
  const JetBatch& last_hidden() const { return acts_[acts_.size() - 2]; }

 private:
  Activation activation_ = Activation::Tanh;
  bool derivs_ = false;
  std::vector<JetBatch> acts_;  // acts_[0] is the input
  std::vector<JetBatch> pre_;   // pre-activations of hidden layers
};

// Value channel only, one column per point.
Eigen::MatrixXd evaluate(const MLPConfig& config, const MLPParams& params,
                         const Eigen::MatrixXd& points);

// Last hidden layer activations (features x points).
Eigen::MatrixXd hidden_features(const MLPConfig& config, const MLPParams& params,
                                const Eigen::MatrixXd& points);

}  // namespace deuq
