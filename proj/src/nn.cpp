#include "revcurl/nn.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "revcurl/errors.hpp"
#include "revcurl/rng.hpp"

namespace revcurl {

ParamSet::ParamSet(std::vector<std::size_t> layer_sizes, Activation activation)
    : sizes_(std::move(layer_sizes)), activation_(activation) {
  if (sizes_.size() < 2) throw ConfigError("a network needs at least an input and an output size");
  for (std::size_t s : sizes_) {
    if (s == 0) throw ConfigError("layer sizes must be positive");
  }
  layers_.reserve(sizes_.size() - 1);
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(sizes_[i]);
    const auto out = static_cast<Eigen::Index>(sizes_[i + 1]);
    layers_.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
}

std::size_t ParamSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

double& ParamSet::at(std::size_t flat_index) {
  for (auto& l : layers_) {
    const auto w = static_cast<std::size_t>(l.weights.size());
    if (flat_index < w) {
      const auto cols = static_cast<std::size_t>(l.weights.cols());
      return l.weights(static_cast<Eigen::Index>(flat_index / cols),
                       static_cast<Eigen::Index>(flat_index % cols));
    }
    flat_index -= w;
    const auto b = static_cast<std::size_t>(l.bias.size());
    if (flat_index < b) return l.bias(static_cast<Eigen::Index>(flat_index));
    flat_index -= b;
  }
  throw ShapeError("flat parameter index out of range");
}

double ParamSet::at(std::size_t flat_index) const {
  return const_cast<ParamSet*>(this)->at(flat_index);
}

Eigen::VectorXd ParamSet::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index k = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) flat(k++) = l.weights(r, c);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat(k++) = l.bias(r);
  }
  return flat;
}

bool ParamSet::same_shape(const ParamSet& other) const { return sizes_ == other.sizes_; }

bool ParamSet::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(), [](const DenseLayer& l) {
    return l.weights.allFinite() && l.bias.allFinite();
  });
}

double ParamSet::max_abs() const {
  double m = 0.0;
  for (const auto& l : layers_) {
    if (l.weights.size() > 0) m = std::max(m, l.weights.cwiseAbs().maxCoeff());
    if (l.bias.size() > 0) m = std::max(m, l.bias.cwiseAbs().maxCoeff());
  }
  return m;
}

void ParamSet::set_zero() {
  for (auto& l : layers_) {
    l.weights.setZero();
    l.bias.setZero();
  }
}

ParamSet& ParamSet::operator+=(const ParamSet& other) {
  if (!same_shape(other)) throw ShapeError("cannot add parameter sets of different shapes");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].weights += other.layers_[i].weights;
    layers_[i].bias += other.layers_[i].bias;
  }
  return *this;
}

ParamSet& ParamSet::operator*=(double scale) {
  for (auto& l : layers_) {
    l.weights *= scale;
    l.bias *= scale;
  }
  return *this;
}

bool operator==(const ParamSet& a, const ParamSet& b) {
  if (a.sizes_ != b.sizes_ || a.activation_ != b.activation_) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    if (a.layers_[i].weights != b.layers_[i].weights || a.layers_[i].bias != b.layers_[i].bias)
      return false;
  }
  return true;
}

ParamSet init_params(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed,
                     Activation activation) {
  ParamSet params(layer_sizes, activation);
  Rng rng(seed);
  for (std::size_t i = 0; i < params.layer_count(); ++i) {
    auto& w = params.layer(i).weights;
    const double bound = std::sqrt(6.0 / static_cast<double>(w.cols() + w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
  }
  return params;
}

namespace {

void check_input(const ParamSet& params, const Observation& input) {
  if (params.layer_count() == 0) throw ShapeError("network has no layers");
  if (static_cast<std::size_t>(input.size()) != params.input_dim()) {
    throw ShapeError("input has " + std::to_string(input.size()) + " entries, network expects " +
                     std::to_string(params.input_dim()));
  }
}

}  // namespace

Eigen::VectorXd forward(const ParamSet& params, const Observation& input, ForwardCache* cache) {
  check_input(params, input);
  const std::size_t n = params.layer_count();
  if (cache) {
    cache->activations.resize(n + 1);
    cache->activations[0] = input;
  }
  Eigen::VectorXd a = input;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& layer = params.layer(i);
    Eigen::VectorXd z = layer.weights * a + layer.bias;
    if (!z.allFinite()) throw NumericalFault("non-finite pre-activation in layer " + std::to_string(i), i);
    if (i + 1 < n) {
      if (params.activation() == Activation::Tanh) {
        z = z.array().tanh();
      } else {
        z = z.cwiseMax(0.0);
      }
    }
    a = std::move(z);
    if (cache) cache->activations[i + 1] = a;
  }
  return a;
}

void backward(const ParamSet& params, const ForwardCache& cache, const Eigen::VectorXd& output_grad,
              GradientSet& out) {
  if (!out.same_shape(params)) out = ParamSet(params.layer_sizes(), params.activation());
  Eigen::VectorXd delta = output_grad;
  for (std::size_t i = params.layer_count(); i-- > 0;) {
    const Eigen::VectorXd& a_in = cache.activations[i];
    auto& g = out.layer(i);
    g.weights.noalias() = delta * a_in.transpose();
    g.bias = delta;
    if (i > 0) {
      Eigen::VectorXd back = params.layer(i).weights.transpose() * delta;
      if (params.activation() == Activation::Tanh) {
        delta = back.array() * (1.0 - a_in.array().square());
      } else {
        delta = back.array() * (a_in.array() > 0.0).cast<double>();
      }
    }
  }
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

Eigen::VectorXd policy_forward(const ParamSet& params, const Observation& obs) {
  return softmax(forward(params, obs));
}

double logprob_grad_into(const ParamSet& params, const Observation& obs, ActionId action,
                         GradientSet& out) {
  if (action.index >= params.output_dim())
    throw PreconditionError("action " + std::to_string(action.index) + " out of range");
  ForwardCache cache;
  const Eigen::VectorXd logits = forward(params, obs, &cache);
  const double m = logits.maxCoeff();
  const Eigen::ArrayXd shifted = logits.array() - m;
  const double log_norm = std::log(shifted.exp().sum());
  const Eigen::VectorXd probs = (shifted - log_norm).exp().matrix();
  const auto a = static_cast<Eigen::Index>(action.index);
  // d log pi(a) / d logits = onehot(a) - probs
  Eigen::VectorXd output_grad = -probs;
  output_grad(a) += 1.0;
  backward(params, cache, output_grad, out);
  return shifted(a) - log_norm;
}

LogProbGrad logprob_grad(const ParamSet& params, const Observation& obs, ActionId action) {
  LogProbGrad r;
  r.logprob = logprob_grad_into(params, obs, action, r.grad);
  return r;
}

double value_forward(const ParamSet& params, const Observation& obs) {
  if (params.output_dim() != 1) throw ShapeError("value network must have a single output");
  return forward(params, obs)(0);
}

double value_grad_into(const ParamSet& params, const Observation& obs, GradientSet& out) {
  if (params.output_dim() != 1) throw ShapeError("value network must have a single output");
  ForwardCache cache;
  const double v = forward(params, obs, &cache)(0);
  backward(params, cache, Eigen::VectorXd::Ones(1), out);
  return v;
}

ValueGrad value_grad(const ParamSet& params, const Observation& obs) {
  ValueGrad r;
  r.value = value_grad_into(params, obs, r.grad);
  return r;
}

OptimizerState OptimizerState::make(OptimizerKind kind, double learning_rate, const ParamSet& like) {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be a finite non-negative number");
  OptimizerState s;
  s.kind = kind;
  s.learning_rate = learning_rate;
  if (kind == OptimizerKind::Adam) {
    s.first_moment = ParamSet(like.layer_sizes(), like.activation());
    s.second_moment = ParamSet(like.layer_sizes(), like.activation());
  }
  return s;
}

void apply_update(ParamSet& params, const GradientSet& grad, OptimizerState& opt, Direction direction) {
  if (!params.same_shape(grad)) throw ShapeError("gradient shape does not match parameters");
  for (std::size_t i = 0; i < grad.layer_count(); ++i) {
    if (!grad.layer(i).weights.allFinite() || !grad.layer(i).bias.allFinite())
      throw NumericalFault("non-finite gradient in layer " + std::to_string(i), i);
  }
  const double sign = direction == Direction::Ascent ? 1.0 : -1.0;
  const bool moves = opt.learning_rate != 0.0;
  ++opt.step_count;

  if (opt.kind == OptimizerKind::Sgd) {
    if (!moves) return;
    const double scale = sign * opt.learning_rate;
    for (std::size_t i = 0; i < params.layer_count(); ++i) {
      params.layer(i).weights += scale * grad.layer(i).weights;
      params.layer(i).bias += scale * grad.layer(i).bias;
    }
    return;
  }

  if (!opt.first_moment.same_shape(params)) {
    opt.first_moment = ParamSet(params.layer_sizes(), params.activation());
    opt.second_moment = ParamSet(params.layer_sizes(), params.activation());
  }
  const double t = static_cast<double>(opt.step_count);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);
  const double step = sign * opt.learning_rate / bc1;
  const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);

  auto update = [&](auto&& theta, auto&& m, auto&& v, const auto& g) {
    m = opt.beta1 * m + (1.0 - opt.beta1) * g;
    v = opt.beta2 * v + (1.0 - opt.beta2) * g.square();
    if (moves) theta += step * m / (v.sqrt() * inv_sqrt_bc2 + opt.epsilon);
  };
  for (std::size_t i = 0; i < params.layer_count(); ++i) {
    auto& p = params.layer(i);
    auto& m = opt.first_moment.layer(i);
    auto& v = opt.second_moment.layer(i);
    const auto& g = grad.layer(i);
    update(p.weights.array(), m.weights.array(), v.weights.array(), g.weights.array());
    update(p.bias.array(), m.bias.array(), v.bias.array(), g.bias.array());
  }
}

namespace {

constexpr std::array<char, 4> kMagic{'R', 'C', 'P', 'S'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), 8);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), 4);
}

std::uint64_t get_uint(std::istream& is, int bytes) {
  std::array<unsigned char, 8> b{};
  is.read(reinterpret_cast<char*>(b.data()), bytes);
  if (!is) throw Error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

const char* activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

}  // namespace

void save_checkpoint(const ParamSet& params, const std::filesystem::path& path,
                     const std::map<std::string, std::string>& metadata) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, kFormatVersion);
  put_u32(os, params.activation() == Activation::Tanh ? 0 : 1);
  put_u32(os, static_cast<std::uint32_t>(params.layer_sizes().size()));
  for (std::size_t s : params.layer_sizes()) put_u64(os, s);
  const Eigen::VectorXd flat = params.flatten();
  for (Eigen::Index i = 0; i < flat.size(); ++i) put_u64(os, std::bit_cast<std::uint64_t>(flat(i)));
  if (!os) throw Error("failed writing checkpoint: " + path.string());

  std::ofstream meta(path.string() + ".meta", std::ios::trunc);
  meta << "format = RCPS\n";
  meta << "version = " << kFormatVersion << "\n";
  meta << "activation = " << activation_name(params.activation()) << "\n";
  meta << "layer_sizes = ";
  for (std::size_t i = 0; i < params.layer_sizes().size(); ++i)
    meta << (i ? "," : "") << params.layer_sizes()[i];
  meta << "\n";
  meta << "parameter_count = " << params.parameter_count() << "\n";
  for (const auto& [k, v] : metadata) meta << k << " = " << v << "\n";
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path.string());
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw Error("not a parameter checkpoint: " + path.string());
  if (get_uint(is, 4) != kFormatVersion) throw Error("unsupported checkpoint version");
  const auto act = get_uint(is, 4);
  if (act > 1) throw Error("unknown activation code in checkpoint");
  const auto n = get_uint(is, 4);
  if (n < 2 || n > 64) throw Error("implausible layer count in checkpoint");
  std::vector<std::size_t> sizes;
  for (std::uint64_t i = 0; i < n; ++i) sizes.push_back(static_cast<std::size_t>(get_uint(is, 8)));
  ParamSet params(sizes, act == 0 ? Activation::Tanh : Activation::Relu);
  for (std::size_t i = 0; i < params.parameter_count(); ++i)
    params.at(i) = std::bit_cast<double>(get_uint(is, 8));
  return params;
}

}  // namespace revcurl
