#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "revcurl/errors.hpp"
#include "revcurl/nn.hpp"
#include "revcurl/rng.hpp"

using namespace revcurl;

namespace {

Observation random_obs(Rng& rng, std::size_t n, double scale = 1.0) {
  Observation o(static_cast<Eigen::Index>(n));
  for (auto& v : o) v = rng.uniform(-scale, scale);
  return o;
}

void randomize(ParamSet& p, Rng& rng, double scale) {
  for (std::size_t i = 0; i < p.parameter_count(); ++i) p.at(i) = rng.uniform(-scale, scale);
}

// Plain-loop network evaluation used as a reference.
Eigen::VectorXd reference_forward(const ParamSet& p, const Observation& x) {
  std::vector<double> a(x.begin(), x.end());
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    const auto& layer = p.layer(l);
    std::vector<double> z(static_cast<std::size_t>(layer.weights.rows()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      double s = layer.bias(r);
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) s += layer.weights(r, c) * a[static_cast<std::size_t>(c)];
      const bool hidden = l + 1 < p.layer_count();
      if (hidden) s = p.activation() == Activation::Tanh ? std::tanh(s) : std::max(0.0, s);
      z[static_cast<std::size_t>(r)] = s;
    }
    a = z;
  }
  return Eigen::Map<Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
}

double reference_logprob(const ParamSet& p, const Observation& x, std::size_t action) {
  const Eigen::VectorXd z = reference_forward(p, x);
  double m = z.maxCoeff(), s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return z(static_cast<Eigen::Index>(action)) - m - std::log(s);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_CASE("parameter counts and shapes") {
  CHECK(ParamSet({4, 128, 2}).parameter_count() == 898);
  const ParamSet shallow = init_params({4, 128, 128, 2}, 1);
  CHECK(shallow.layer_count() == 3);
  CHECK(shallow.parameter_count() == 4 * 128 + 128 + 128 * 128 + 128 + 128 * 2 + 2);
  const ParamSet deep = init_params({8, 256, 256, 256, 4}, 1);
  CHECK(deep.layer_count() == 4);
  CHECK(deep.layer(1).weights.rows() == 256);
  CHECK(deep.layer(3).weights.cols() == 256);
  CHECK(deep.output_dim() == 4);
}

TEST_CASE("initialization is seeded, bounded and has zero biases") {
  const ParamSet a = init_params({4, 16, 2}, 9);
  const ParamSet b = init_params({4, 16, 2}, 9);
  const ParamSet c = init_params({4, 16, 2}, 10);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  const double bound0 = std::sqrt(6.0 / 20.0);
  CHECK(a.layer(0).weights.cwiseAbs().maxCoeff() <= bound0);
  CHECK(a.layer(0).bias.isZero());
  CHECK(a.layer(1).bias.isZero());
}

TEST_CASE("zero network gives a uniform policy") {
  const ParamSet p({4, 8, 2});
  const Eigen::VectorXd probs = policy_forward(p, Observation::Zero(4));
  CHECK(probs(0) == 0.5);
  CHECK(probs(1) == 0.5);
}

TEST_CASE("forward matches the loop reference for both activations") {
  Rng rng(3);
  for (Activation act : {Activation::Tanh, Activation::Relu}) {
    ParamSet p({5, 7, 6, 3}, act);
    randomize(p, rng, 0.8);
    for (int i = 0; i < 20; ++i) {
      const Observation x = random_obs(rng, 5);
      CHECK((forward(p, x) - reference_forward(p, x)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("softmax is a distribution and shift invariant") {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd z(4);
    for (auto& v : z) v = rng.uniform(-50, 50);
    const Eigen::VectorXd p = softmax(z);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    const double c = rng.uniform(-500, 500);
    CHECK((softmax(z.array() + c) - p).cwiseAbs().maxCoeff() < 1e-12);
  }
  Eigen::VectorXd big(2);
  big << 1000.0, 0.0;
  const Eigen::VectorXd p = softmax(big);
  CHECK(p.allFinite());
  CHECK(p(0) == 1.0);
}

TEST_CASE("policy probabilities sum to one over random inputs") {
  Rng rng(6);
  const ParamSet p = init_params({8, 32, 32, 4}, 2);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd probs = policy_forward(p, random_obs(rng, 8, 5.0));
    CHECK(std::abs(probs.sum() - 1.0) < 1e-12);
    CHECK(probs.minCoeff() >= 0.0);
  }
}

TEST_CASE("score-function identity: expected grad log pi is zero") {
  Rng rng(7);
  ParamSet p({3, 5, 3});
  randomize(p, rng, 1.0);
  const Observation x = random_obs(rng, 3);
  const Eigen::VectorXd probs = policy_forward(p, x);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.parameter_count()));
  for (std::size_t a = 0; a < 3; ++a) total += probs(static_cast<Eigen::Index>(a)) * logprob_grad(p, x, ActionId{a}).grad.flatten();
  CHECK(total.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("log-probability gradient matches central differences of the reference") {
  Rng rng(8);
  for (Activation act : {Activation::Tanh, Activation::Relu}) {
    ParamSet p({4, 6, 5, 2}, act);
    randomize(p, rng, 0.7);
    const Observation x = random_obs(rng, 4);
    const ActionId a{1};
    const LogProbGrad g = logprob_grad(p, x, a);
    CHECK(g.logprob == doctest::Approx(reference_logprob(p, x, 1)).epsilon(1e-12));
    const double h = 1e-5;
    for (std::size_t i = 0; i < p.parameter_count(); ++i) {
      const double saved = p.at(i);
      p.at(i) = saved + h;
      const double up = reference_logprob(p, x, 1);
      p.at(i) = saved - h;
      const double down = reference_logprob(p, x, 1);
      p.at(i) = saved;
      CHECK(rel_err(g.grad.at(i), (up - down) / (2 * h)) <= 1e-4);
    }
  }
}

TEST_CASE("value gradient matches central differences") {
  Rng rng(9);
  ParamSet p({4, 6, 1});
  randomize(p, rng, 0.7);
  const Observation x = random_obs(rng, 4);
  const ValueGrad g = value_grad(p, x);
  CHECK(g.value == doctest::Approx(reference_forward(p, x)(0)).epsilon(1e-12));
  const double h = 1e-5;
  for (std::size_t i = 0; i < p.parameter_count(); ++i) {
    const double saved = p.at(i);
    p.at(i) = saved + h;
    const double up = reference_forward(p, x)(0);
    p.at(i) = saved - h;
    const double down = reference_forward(p, x)(0);
    p.at(i) = saved;
    CHECK(rel_err(g.grad.at(i), (up - down) / (2 * h)) <= 1e-4);
  }
}

TEST_CASE("uniform policy output-bias gradient is onehot minus probabilities") {
  const ParamSet p({4, 8, 2});
  const LogProbGrad g = logprob_grad(p, Observation::Zero(4), ActionId{0});
  CHECK(g.logprob == doctest::Approx(std::log(0.5)));
  CHECK(g.grad.layer(1).bias(0) == 0.5);
  CHECK(g.grad.layer(1).bias(1) == -0.5);
}

TEST_CASE("zero value network predicts zero") {
  const ParamSet v({4, 16, 1});
  CHECK(value_forward(v, Observation::Ones(4)) == 0.0);
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  for (OptimizerKind kind : {OptimizerKind::Sgd, OptimizerKind::Adam}) {
    ParamSet p = init_params({4, 8, 2}, 1);
    const ParamSet before = p;
    OptimizerState opt = OptimizerState::make(kind, 0.0, p);
    const LogProbGrad g = logprob_grad(p, Observation::Ones(4), ActionId{1});
    apply_update(p, g.grad, opt, Direction::Ascent);
    CHECK(p == before);
    CHECK(opt.step_count == 1);
  }
}

TEST_CASE("sgd ascent and descent") {
  ParamSet p({1, 1});
  GradientSet g({1, 1});
  g.layer(0).bias(0) = 1.0;
  OptimizerState opt = OptimizerState::make(OptimizerKind::Sgd, 0.1, p);
  apply_update(p, g, opt, Direction::Ascent);
  CHECK(p.layer(0).bias(0) == doctest::Approx(0.1));
  apply_update(p, g, opt, Direction::Descent);
  apply_update(p, g, opt, Direction::Descent);
  CHECK(p.layer(0).bias(0) == doctest::Approx(-0.1));
}

TEST_CASE("first adam step moves each parameter by about lr times the gradient sign") {
  Rng rng(11);
  ParamSet p = init_params({3, 4, 2}, 5);
  GradientSet g(p.layer_sizes());
  randomize(g, rng, 2.0);
  const ParamSet before = p;
  OptimizerState opt = OptimizerState::make(OptimizerKind::Adam, 1e-3, p);
  apply_update(p, g, opt, Direction::Ascent);
  for (std::size_t i = 0; i < p.parameter_count(); ++i) {
    const double sign = g.at(i) > 0 ? 1.0 : -1.0;
    CHECK(p.at(i) - before.at(i) == doctest::Approx(1e-3 * sign).epsilon(1e-4));
  }
}

TEST_CASE("adam matches a scalar reference over several steps") {
  ParamSet p({1, 1});
  OptimizerState opt = OptimizerState::make(OptimizerKind::Adam, 0.01, p);
  double theta = 0.0, m = 0.0, v = 0.0;
  const double grads[] = {0.5, -1.0, 2.0, 0.25, -0.75};
  for (int t = 1; t <= 5; ++t) {
    const double gr = grads[t - 1];
    GradientSet g({1, 1});
    g.layer(0).bias(0) = gr;
    apply_update(p, g, opt, Direction::Descent);
    m = 0.9 * m + 0.1 * gr;
    v = 0.999 * v + 0.001 * gr * gr;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    theta -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p.layer(0).bias(0) == doctest::Approx(theta).epsilon(1e-9));
  }
}

TEST_CASE("non-finite gradient is reported with its layer and leaves parameters unchanged") {
  ParamSet p = init_params({3, 4, 2}, 1);
  const ParamSet before = p;
  GradientSet g(p.layer_sizes());
  g.layer(1).weights(0, 2) = std::nan("");
  OptimizerState opt = OptimizerState::make(OptimizerKind::Adam, 1e-3, p);
  try {
    apply_update(p, g, opt, Direction::Ascent);
    FAIL("expected NumericalFault");
  } catch (const NumericalFault& e) {
    CHECK(e.layer() == 1);
  }
  CHECK(p == before);
}

TEST_CASE("non-finite pre-activation is reported with its layer") {
  ParamSet p({2, 3, 2});
  p.layer(0).weights(0, 0) = std::numeric_limits<double>::infinity();
  Observation x(2);
  x << 0.0, 1.0;
  try {
    forward(p, Observation::Constant(2, 1.0));
    FAIL("expected NumericalFault");
  } catch (const NumericalFault& e) {
    CHECK(e.layer() == 0);
  }
}

TEST_CASE("mismatched shapes are rejected") {
  ParamSet p({3, 4, 2});
  GradientSet g({3, 5, 2});
  OptimizerState opt = OptimizerState::make(OptimizerKind::Sgd, 1e-3, p);
  CHECK_THROWS_AS(apply_update(p, g, opt, Direction::Ascent), ShapeError);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "revcurl_test_nn";
  std::filesystem::create_directories(dir);
  const ParamSet p = init_params({8, 16, 16, 4}, 42, Activation::Relu);
  save_checkpoint(p, dir / "policy.bin", {{"seed", "42"}});
  const ParamSet q = load_checkpoint(dir / "policy.bin");
  CHECK(p == q);
  CHECK(q.activation() == Activation::Relu);
  std::ifstream meta(dir / "policy.bin.meta");
  std::string line;
  bool found = false;
  while (std::getline(meta, line)) found = found || line == "seed = 42";
  CHECK(found);

  std::ofstream(dir / "garbage.bin") << "nope";
  CHECK_THROWS_AS(load_checkpoint(dir / "garbage.bin"), Error);
  std::filesystem::remove_all(dir);
}
