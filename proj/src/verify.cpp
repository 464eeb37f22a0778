#include "revcurl/verify.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>

#include "revcurl/environments.hpp"
#include "revcurl/nn.hpp"
#include "revcurl/policy_gradient.hpp"
#include "revcurl/rng.hpp"
#include "revcurl/trainer.hpp"

namespace revcurl {

namespace {

template <typename F>
CheckResult timed(std::string name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r = body();
  r.name = std::move(name);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

ParamSet random_network(Rng& rng, const std::vector<std::size_t>& sizes) {
  ParamSet p = init_params(sizes, rng.next_u64());
  for (std::size_t i = 0; i < p.layer_count(); ++i) {
    auto& b = p.layer(i).bias;
    for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = rng.uniform(-0.5, 0.5);
  }
  return p;
}

// Largest relative error between `analytic` and central differences of `f`.
template <typename F>
double max_fd_error(ParamSet& params, const GradientSet& analytic, double h, F&& f) {
  double worst = 0.0;
  for (std::size_t i = 0; i < params.parameter_count(); ++i) {
    const double saved = params.at(i);
    params.at(i) = saved + h;
    const double up = f(params);
    params.at(i) = saved - h;
    const double down = f(params);
    params.at(i) = saved;
    worst = std::max(worst, relative_error(analytic.at(i), (up - down) / (2.0 * h)));
  }
  return worst;
}

}  // namespace

CheckResult check_gradient_fidelity(const VerifyOptions& options) {
  return timed("gradient fidelity", [&] {
    Rng rng(options.seed);
    double worst_policy = 0.0;
    double worst_value = 0.0;
    for (std::size_t cfg = 0; cfg < options.gradient_configs; ++cfg) {
      const std::size_t in = 2 + rng.next_u64() % 7;
      const std::size_t actions = 2 + rng.next_u64() % 4;
      std::vector<std::size_t> sizes{in};
      const std::size_t depth = 1 + rng.next_u64() % 2;
      for (std::size_t d = 0; d < depth; ++d) sizes.push_back(3 + rng.next_u64() % 10);

      Observation obs(static_cast<Eigen::Index>(in));
      for (Eigen::Index k = 0; k < obs.size(); ++k) obs(k) = rng.uniform(-2.0, 2.0);

      auto policy_sizes = sizes;
      policy_sizes.push_back(actions);
      ParamSet policy = random_network(rng, policy_sizes);
      const ActionId action{rng.next_u64() % actions};
      const LogProbGrad lg = logprob_grad(policy, obs, action);
      worst_policy = std::max(worst_policy, max_fd_error(policy, lg.grad, options.finite_difference_step,
                                                         [&](const ParamSet& p) {
                                                           return std::log(policy_forward(p, obs)(
                                                               static_cast<Eigen::Index>(action.index)));
                                                         }));

      auto value_sizes = sizes;
      value_sizes.push_back(1);
      ParamSet value = random_network(rng, value_sizes);
      const double target = rng.uniform(-3.0, 3.0);
      ValueGrad vg = value_grad(value, obs);
      vg.grad *= step_value_loss(vg.value, target).d_value;
      worst_value = std::max(worst_value, max_fd_error(value, vg.grad, options.finite_difference_step,
                                                       [&](const ParamSet& p) {
                                                         return step_value_loss(value_forward(p, obs), target).loss;
                                                       }));
    }
    CheckResult r;
    r.passed = worst_policy < options.gradient_tolerance && worst_value < options.gradient_tolerance;
    r.detail = fmt::format("{} configs, max rel err log-prob {:.3e}, value loss {:.3e} (tol {:.0e})",
                           options.gradient_configs, worst_policy, worst_value, options.gradient_tolerance);
    return r;
  });
}

CheckResult check_return_math(const VerifyOptions& options) {
  return timed("return math", [&] {
    Rng rng(options.seed ^ 0x5555);
    const double gammas[] = {0.9, 0.99, 1.0};
    double worst_recursion = 0.0;
    double worst_direct = 0.0;
    double worst_mean = 0.0;
    double worst_std = 0.0;
    bool constant_ok = true;
    for (std::size_t i = 0; i < options.return_vectors; ++i) {
      const double gamma = gammas[i % 3];
      const std::size_t n = 1 + rng.next_u64() % 1000;
      std::vector<double> rewards(n);
      for (double& r : rewards) r = rng.uniform(-1.0, 1.0);
      const ReturnSeries g = discounted_returns(rewards, gamma);
      for (std::size_t t = 0; t < n; ++t) {
        const double next = t + 1 < n ? g.values[t + 1] : 0.0;
        worst_recursion = std::max(worst_recursion, std::abs(g.values[t] - (rewards[t] + gamma * next)));
      }
      // Direct sum at one random index.
      const std::size_t t0 = rng.next_u64() % n;
      double direct = 0.0;
      double discount = 1.0;
      for (std::size_t k = t0; k < n; ++k, discount *= gamma) direct += discount * rewards[k];
      worst_direct = std::max(worst_direct, std::abs(direct - g.values[t0]));

      if (n >= 2) {
        const NormalizedReturnSeries z = normalize_returns(g);
        double mean = 0.0;
        for (double v : z.values) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : z.values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n);
        worst_mean = std::max(worst_mean, std::abs(mean));
        worst_std = std::max(worst_std, std::abs(std::sqrt(var) - 1.0));
      }
      const double c = rng.uniform(-50.0, 50.0);
      const NormalizedReturnSeries zc = normalize_returns(ReturnSeries{std::vector<double>(n, c), gamma});
      for (double v : zc.values) constant_ok = constant_ok && v == 0.0;
    }
    CheckResult r;
    r.passed = worst_recursion <= 1e-9 && worst_direct <= 1e-9 && worst_mean < 1e-9 && worst_std < 1e-6 && constant_ok;
    r.detail = fmt::format(
        "{} vectors: recursion err {:.2e}, direct-sum err {:.2e}, |mean| {:.2e}, |std-1| {:.2e}, constant->0 {}",
        options.return_vectors, worst_recursion, worst_direct, worst_mean, worst_std, constant_ok ? "yes" : "no");
    return r;
  });
}

CheckResult check_order_equivalence(const VerifyOptions& options) {
  return timed("order equivalence", [&] {
    CartPole env;
    const NetworkSpec spec{env.observation_dim(), env.action_count(), {128, 128}, Activation::Tanh};
    const TrainState initial = make_train_state(spec, false, OptimizerKind::Sgd, 1e-3, options.seed);
    Rng action_rng(derive_seed(options.seed, StreamPurpose::ActionSampling));
    const NetworkPolicy policy(initial.policy);
    const Trajectory traj =
        collect_episode(env, policy, derive_seed(options.seed, StreamPurpose::Environment), action_rng);

    auto trained = [&](Ordering ordering, UpdateMode mode) {
      TrainState s = initial;
      AlgorithmVariant v = AlgorithmVariant::reinforce(ordering);
      v.update_mode = mode;
      train_episode(s, traj, v, 0.99);
      return s.policy.flatten();
    };
    const Eigen::VectorXd base = initial.policy.flatten();
    const Eigen::VectorXd batched_f = trained(Ordering::Forward, UpdateMode::BatchedPerEpisode) - base;
    const Eigen::VectorXd batched_b = trained(Ordering::Backward, UpdateMode::BatchedPerEpisode) - base;
    const Eigen::VectorXd step_f = trained(Ordering::Forward, UpdateMode::PerStep);
    const Eigen::VectorXd step_b = trained(Ordering::Backward, UpdateMode::PerStep);
    const double batched_gap = (batched_f - batched_b).cwiseAbs().maxCoeff();
    const double per_step_gap = (step_f - step_b).cwiseAbs().maxCoeff();

    CheckResult r;
    r.passed = traj.size() >= 2 && batched_gap <= 1e-9 && per_step_gap > 1e-9;
    r.detail = fmt::format("episode length {}, batched max|dF-dB| {:.3e} (<= 1e-9), per-step max|dtheta| {:.3e} (> 1e-9)",
                           traj.size(), batched_gap, per_step_gap);
    return r;
  });
}

CheckResult check_chain_exact_gradient(const VerifyOptions& options) {
  return timed("chain exact gradient", [&] {
    ChainMdp chain(options.chain_states, ChainMdp::kMaxEnumerableSteps);
    const ParamSet policy = init_params({chain.observation_dim(), 2}, options.seed ^ 0xC4A1);
    const Eigen::VectorXd exact = chainmdp_exact_gradient(chain, policy, 1.0);

    const auto dim = exact.size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(dim);
    Rng action_rng(options.seed ^ 0xA11CE);
    const NetworkPolicy sampler(policy);
    for (std::size_t i = 1; i <= options.chain_episodes; ++i) {
      const Trajectory traj = collect_episode(chain, sampler, i, action_rng);
      const ReturnSeries g = discounted_returns(traj.rewards(), 1.0);
      const Eigen::VectorXd sample = episode_policy_gradient(policy, traj, g.values).flatten();
      const Eigen::VectorXd delta = sample - mean;
      mean += delta / static_cast<double>(i);
      m2 += delta.cwiseProduct(sample - mean);
    }
    const double n = static_cast<double>(options.chain_episodes);
    const Eigen::VectorXd se = (m2 / (n - 1.0) / n).cwiseSqrt();
    double worst_z = 0.0;
    std::size_t failures = 0;
    for (Eigen::Index k = 0; k < dim; ++k) {
      const double diff = std::abs(mean(k) - exact(k));
      if (diff > 3.0 * se(k) + 1e-12) ++failures;
      if (se(k) > 0.0) worst_z = std::max(worst_z, diff / se(k));
    }
    CheckResult r;
    r.passed = failures == 0;
    r.detail = fmt::format("N={}, {} episodes, {} coordinates, worst |mean-exact|/SE {:.2f} (limit 3), failures {}",
                           options.chain_states, options.chain_episodes, dim, worst_z, failures);
    return r;
  });
}

std::vector<CheckResult> run_verification(const VerifyOptions& options) {
  return {check_gradient_fidelity(options), check_return_math(options), check_order_equivalence(options),
          check_chain_exact_gradient(options)};
}

}  // namespace revcurl
