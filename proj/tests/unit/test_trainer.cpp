#include <doctest.h>

#include <cmath>

#include "revcurl/environments.hpp"
#include "revcurl/errors.hpp"
#include "revcurl/policy_gradient.hpp"
#include "revcurl/trainer.hpp"

using namespace revcurl;

namespace {

Trajectory cartpole_episode(const ParamSet& policy, std::uint64_t seed) {
  CartPole env;
  const NetworkPolicy sampler(policy);
  Rng rng(seed);
  return collect_episode(env, sampler, seed, rng);
}

Trajectory chain_right(std::size_t n) {
  ChainMdp chain(n, 12);
  std::vector<Transition> steps;
  for (std::size_t c = 0; c + 1 < n; ++c) {
    Transition t;
    t.state = chain.observation_for(c);
    t.action = ActionId{1};
    t.reward = c + 2 == n ? 1.0 : 0.0;
    t.terminal = c + 2 == n;
    t.breakdown.base = t.reward;
    steps.push_back(t);
  }
  return Trajectory(steps, Orientation::Forward);
}

TrainState small_state(OptimizerKind kind, double lr, bool baseline, std::uint64_t seed = 3) {
  NetworkSpec spec{4, 2, {16, 16}, Activation::Tanh};
  return make_train_state(spec, baseline, kind, lr, seed);
}

double max_diff(const ParamSet& a, const ParamSet& b) { return (a.flatten() - b.flatten()).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("variant labels") {
  CHECK(AlgorithmVariant::reinforce(Ordering::Forward).label() == "forward");
  CHECK(AlgorithmVariant::reinforce(Ordering::Backward, true).label() == "backward+baseline");
  AlgorithmVariant v = AlgorithmVariant::reinforce(Ordering::Backward, true);
  v.normalize_returns = true;
  CHECK(v.label() == "backward+baseline+norm");
  CHECK(parse_ordering("backward") == Ordering::Backward);
  CHECK_THROWS_AS(parse_ordering("sideways"), ConfigError);
}

TEST_CASE("train state initialization is seeded per purpose") {
  const TrainState a = small_state(OptimizerKind::Adam, 1e-3, true, 5);
  const TrainState b = small_state(OptimizerKind::Adam, 1e-3, true, 5);
  CHECK(a.policy == b.policy);
  CHECK(*a.value == *b.value);
  CHECK(a.value->output_dim() == 1);
  CHECK(a.policy.output_dim() == 2);
  CHECK_FALSE(a.policy == small_state(OptimizerKind::Adam, 1e-3, true, 6).policy);
  CHECK_FALSE(small_state(OptimizerKind::Adam, 1e-3, false).value.has_value());
}

TEST_CASE("processing order pairs every step with its own forward return") {
  const Trajectory t = chain_right(4);  // rewards 0, 0, 1
  CHECK(processing_signals(t, 0.5, Ordering::Forward) == std::vector<double>{0.25, 0.5, 1.0});
  CHECK(processing_signals(t, 0.5, Ordering::Backward) == std::vector<double>{1.0, 0.5, 0.25});

  std::vector<Transition> steps;
  for (int i = 0; i < 3; ++i) {
    Transition tr;
    tr.state = Observation::Constant(1, i);
    tr.action = ActionId{0};
    tr.reward = 1.0;
    tr.breakdown.base = 1.0;
    steps.push_back(tr);
  }
  const Trajectory ones(steps, Orientation::Forward);
  CHECK(processing_signals(ones, 0.0, Ordering::Backward) == std::vector<double>{1, 1, 1});
  const auto half = processing_signals(ones, 0.5, Ordering::Backward);
  CHECK(half == std::vector<double>{1.0, 1.5, 1.75});
}

TEST_CASE("returns indexing holds on sampled episodes") {
  const ParamSet policy = init_params({4, 16, 2}, 8);
  for (std::uint64_t seed = 0; seed < 50; ++seed) CHECK(returns_indexing_check(cartpole_episode(policy, seed), 0.99));
  CHECK(returns_indexing_check(chain_right(2), 0.9));
}

TEST_CASE("schedule refuses reversed input and mismatched signals") {
  const Trajectory t = chain_right(4);
  CHECK_THROWS_AS(schedule_updates(reverse_trajectory(t), std::vector<double>{1, 2, 3}, Ordering::Forward),
                  PreconditionError);
  CHECK_THROWS_AS(schedule_updates(t, std::vector<double>{1, 2}, Ordering::Forward), PreconditionError);
}

TEST_CASE("zero learning rate leaves every parameter unchanged") {
  for (bool baseline : {false, true}) {
    TrainState s = small_state(OptimizerKind::Adam, 0.0, baseline);
    const TrainState before = s;
    const Trajectory t = cartpole_episode(s.policy, 1);
    train_episode(s, t, AlgorithmVariant::reinforce(Ordering::Backward, baseline), 0.99);
    CHECK(s.policy == before.policy);
    if (baseline) CHECK(*s.value == *before.value);
    CHECK(s.episode_index == 1);
    CHECK(s.timesteps_processed == t.size());
  }
}

TEST_CASE("single-step episodes update identically in either order") {
  TrainState f = small_state(OptimizerKind::Adam, 1e-2, true);
  TrainState b = f;
  Transition tr;
  tr.state = Observation::Constant(4, 0.03);
  tr.action = ActionId{1};
  tr.reward = 1.0;
  tr.terminal = true;
  tr.breakdown.base = 1.0;
  const Trajectory t({tr}, Orientation::Forward);
  train_episode(f, t, AlgorithmVariant::reinforce(Ordering::Forward, true), 0.99);
  train_episode(b, t, AlgorithmVariant::reinforce(Ordering::Backward, true), 0.99);
  CHECK(f.policy == b.policy);
  CHECK(*f.value == *b.value);
}

TEST_CASE("batched updates do not depend on processing order") {
  TrainState f = small_state(OptimizerKind::Sgd, 1e-2, false);
  TrainState b = f;
  const Trajectory t = cartpole_episode(f.policy, 4);
  REQUIRE(t.size() > 5);
  AlgorithmVariant vf = AlgorithmVariant::reinforce(Ordering::Forward);
  AlgorithmVariant vb = AlgorithmVariant::reinforce(Ordering::Backward);
  vf.update_mode = vb.update_mode = UpdateMode::BatchedPerEpisode;
  train_episode(f, t, vf, 0.99);
  train_episode(b, t, vb, 0.99);
  CHECK(max_diff(f.policy, b.policy) <= 1e-9);

  // Batched SGD equals one step along the summed episode gradient.
  TrainState ref = small_state(OptimizerKind::Sgd, 1e-2, false);
  const auto g = discounted_returns(t.rewards(), 0.99).values;
  GradientSet total = episode_policy_gradient(ref.policy, t, g);
  total *= 1e-2;
  ref.policy += total;
  CHECK(max_diff(f.policy, ref.policy) <= 1e-12);
}

TEST_CASE("per-step updates differ between orderings") {
  TrainState f = small_state(OptimizerKind::Sgd, 1e-2, false);
  TrainState b = f;
  const Trajectory t = cartpole_episode(f.policy, 4);
  REQUIRE(t.size() > 5);
  train_episode(f, t, AlgorithmVariant::reinforce(Ordering::Forward), 0.99);
  train_episode(b, t, AlgorithmVariant::reinforce(Ordering::Backward), 0.99);
  CHECK(max_diff(f.policy, b.policy) > 1e-9);
}

TEST_CASE("per-step backward processing recomputes gradients at the updated parameters") {
  // Hand-rolled per-step SGD in reversed order.
  TrainState s = small_state(OptimizerKind::Sgd, 5e-3, false);
  ParamSet ref = s.policy;
  const Trajectory t = cartpole_episode(s.policy, 9);
  const auto g = discounted_returns(t.rewards(), 0.99).values;
  for (std::size_t k = 0; k < t.size(); ++k) {
    const std::size_t i = t.size() - 1 - k;
    GradientSet step = logprob_grad(ref, t[i].state, t[i].action).grad;
    step *= 5e-3 * g[i];
    ref += step;
  }
  train_episode(s, t, AlgorithmVariant::reinforce(Ordering::Backward), 0.99);
  CHECK(max_diff(s.policy, ref) <= 1e-12);
}

TEST_CASE("a value network that already predicts every return leaves the policy unchanged") {
  const double gamma = 0.9;
  const Trajectory t = chain_right(5);
  const auto g = discounted_returns(t.rewards(), gamma).values;
  TrainState s;
  s.policy = init_params({5, 8, 2}, 1);
  s.policy_opt = OptimizerState::make(OptimizerKind::Adam, 1e-2, s.policy);
  ParamSet v({5, 1});
  for (std::size_t c = 0; c < 4; ++c) v.layer(0).weights(0, static_cast<Eigen::Index>(c)) = g[c];
  s.value = v;
  s.value_opt = OptimizerState::make(OptimizerKind::Adam, 1e-2, v);
  const ParamSet before = s.policy;
  for (Ordering o : {Ordering::Forward, Ordering::Backward}) {
    train_episode(s, t, AlgorithmVariant::reinforce(o, true), gamma);
    CHECK(s.policy == before);
    CHECK(*s.value == v);
  }
}

TEST_CASE("baseline variant requires a value network") {
  TrainState s = small_state(OptimizerKind::Adam, 1e-3, false);
  const Trajectory t = cartpole_episode(s.policy, 0);
  CHECK_THROWS_AS(train_episode(s, t, AlgorithmVariant::reinforce(Ordering::Forward, true), 0.99),
                  PreconditionError);
}

TEST_CASE("divergence is reported with episode, timestep and variant") {
  TrainState s = small_state(OptimizerKind::Sgd, 1e9, false);
  const Trajectory t = cartpole_episode(s.policy, 2);
  s.episode_index = 41;
  try {
    train_episode(s, t, AlgorithmVariant::reinforce(Ordering::Backward), 0.99);
    FAIL("expected DivergenceFault");
  } catch (const DivergenceFault& e) {
    const std::string what = e.what();
    CHECK(what.find("episode 41") != std::string::npos);
    CHECK(what.find("timestep " + std::to_string(t.size() - 1)) != std::string::npos);
    CHECK(what.find("backward") != std::string::npos);
  }
}

TEST_CASE("non-finite parameters surface as a numerical fault with context") {
  TrainState s = small_state(OptimizerKind::Sgd, 1e-3, false);
  const Trajectory t = cartpole_episode(s.policy, 2);
  s.policy.layer(1).weights(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(train_episode(s, t, AlgorithmVariant::reinforce(Ordering::Forward), 0.99), NumericalFault);
}
