#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "revcurl/mdp.hpp"

namespace revcurl {

enum class Activation { Tanh, Relu };

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

// Weights and biases of a fully connected feed-forward network. The same type
// doubles as a gradient container (see GradientSet).
class ParamSet {
 public:
  ParamSet() = default;
  // All-zero parameters for the given layer sizes.
  explicit ParamSet(std::vector<std::size_t> layer_sizes, Activation activation = Activation::Tanh);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t layer_count() const { return layers_.size(); }
  std::size_t parameter_count() const;

  DenseLayer& layer(std::size_t i) { return layers_[i]; }
  const DenseLayer& layer(std::size_t i) const { return layers_[i]; }

  // Flat addressing: layer by layer, weights (row-major) then bias.
  double& at(std::size_t flat_index);
  double at(std::size_t flat_index) const;
  Eigen::VectorXd flatten() const;

  bool same_shape(const ParamSet& other) const;
  bool all_finite() const;
  double max_abs() const;

  void set_zero();
  ParamSet& operator+=(const ParamSet& other);
  ParamSet& operator*=(double scale);

  friend bool operator==(const ParamSet& a, const ParamSet& b);

 private:
  std::vector<std::size_t> sizes_;
  Activation activation_ = Activation::Tanh;
  std::vector<DenseLayer> layers_;
};

using GradientSet = ParamSet;

// Uniform(-b, b) weights with b = sqrt(6 / (fan_in + fan_out)), zero biases.
ParamSet init_params(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed,
                     Activation activation = Activation::Tanh);

// Intermediate values of one forward pass, reused by the backward pass.
struct ForwardCache {
  std::vector<Eigen::VectorXd> activations;  // [0] = input, back() = raw output
};

// Raw network output (logits or value); hidden layers use the activation.
Eigen::VectorXd forward(const ParamSet& params, const Observation& input, ForwardCache* cache = nullptr);

// Gradient of sum_k output_grad[k] * output[k] with respect to every parameter.
void backward(const ParamSet& params, const ForwardCache& cache, const Eigen::VectorXd& output_grad,
              GradientSet& out);

// Max-subtracted softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

Eigen::VectorXd policy_forward(const ParamSet& params, const Observation& obs);

struct LogProbGrad {
  double logprob = 0.0;
  GradientSet grad;
};

LogProbGrad logprob_grad(const ParamSet& params, const Observation& obs, ActionId action);
// In-place variant that reuses `out` storage; returns log pi(action | obs).
double logprob_grad_into(const ParamSet& params, const Observation& obs, ActionId action,
                         GradientSet& out);

double value_forward(const ParamSet& params, const Observation& obs);

struct ValueGrad {
  double value = 0.0;
  GradientSet grad;  // dV/dtheta
};

ValueGrad value_grad(const ParamSet& params, const Observation& obs);
double value_grad_into(const ParamSet& params, const Observation& obs, GradientSet& out);

// Policy network viewed as an action sampler.
class NetworkPolicy final : public PolicySampler {
 public:
  explicit NetworkPolicy(const ParamSet& params) : params_(&params) {}
  std::size_t input_dim() const override { return params_->input_dim(); }
  Eigen::VectorXd action_probabilities(const Observation& obs) const override {
    return policy_forward(*params_, obs);
  }

 private:
  const ParamSet* params_;
};

enum class OptimizerKind { Sgd, Adam };
enum class Direction { Ascent, Descent };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  GradientSet first_moment;
  GradientSet second_moment;
  std::uint64_t step_count = 0;

  static OptimizerState make(OptimizerKind kind, double learning_rate, const ParamSet& like);
};

// One optimizer step. Throws ShapeError on mismatched shapes and
// NumericalFault (with the layer index) on a non-finite gradient; the
// parameters are untouched in both cases.
void apply_update(ParamSet& params, const GradientSet& grad, OptimizerState& opt, Direction direction);

// Checkpoint: binary parameter file plus "<path>.meta" key = value sidecar.
//   bytes 0-3   magic "RCPS"
//   u32         format version (1)
//   u32         activation (0 tanh, 1 relu)
//   u32         number of layer sizes L
//   u64 x L     layer sizes
//   f64 ...     per layer: weights row-major (out x in), then bias
// All integers and floats little-endian.
void save_checkpoint(const ParamSet& params, const std::filesystem::path& path,
                     const std::map<std::string, std::string>& metadata = {});
ParamSet load_checkpoint(const std::filesystem::path& path);

}  // namespace revcurl
