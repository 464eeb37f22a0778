#include "revcurl/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "revcurl/errors.hpp"

namespace revcurl {

Trajectory::Trajectory(std::vector<Transition> steps, Orientation orientation)
    : steps_(std::move(steps)), orientation_(orientation) {
  if (steps_.empty()) throw PreconditionError("trajectory must contain at least one step");
  // Only the last step in collection order may be terminal.
  const std::size_t last = orientation_ == Orientation::Forward ? steps_.size() - 1 : 0;
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    if (steps_[i].terminal && i != last)
      throw PreconditionError("terminal flag set on a non-final step " + std::to_string(i));
    if (!std::isfinite(steps_[i].reward))
      throw PreconditionError("non-finite reward at step " + std::to_string(i));
  }
}

std::vector<double> Trajectory::rewards() const {
  std::vector<double> out;
  out.reserve(steps_.size());
  for (const auto& s : steps_) out.push_back(s.reward);
  return out;
}

double Trajectory::total_reward() const {
  return std::accumulate(steps_.begin(), steps_.end(), 0.0,
                         [](double acc, const Transition& t) { return acc + t.reward; });
}

Trajectory reverse_trajectory(const Trajectory& trajectory) {
  std::vector<Transition> steps(trajectory.steps().rbegin(), trajectory.steps().rend());
  const Orientation flipped = trajectory.orientation() == Orientation::Forward
                                  ? Orientation::Backward
                                  : Orientation::Forward;
  return Trajectory(std::move(steps), flipped);
}

namespace {

void require_finite(const Observation& obs, std::string_view env_name, std::size_t step) {
  if (!obs.allFinite()) {
    throw EnvironmentFault("environment '" + std::string(env_name) +
                           "' produced a non-finite observation at step " + std::to_string(step));
  }
}

}  // namespace

Trajectory collect_episode(Environment& env, const PolicySampler& policy, std::uint64_t reset_seed,
                           Rng& action_rng) {
  if (policy.input_dim() != env.observation_dim()) {
    throw PreconditionError("policy input dim " + std::to_string(policy.input_dim()) +
                            " does not match observation dim " +
                            std::to_string(env.observation_dim()));
  }
  const std::size_t cap = env.max_episode_steps();
  if (cap == 0) throw PreconditionError("environment declares a zero step cap");

  std::vector<Transition> steps;
  Observation obs = env.reset(reset_seed);
  require_finite(obs, env.name(), 0);

  while (true) {
    const Eigen::VectorXd probs = policy.action_probabilities(obs);
    const ActionId action{action_rng.categorical({probs.data(), static_cast<std::size_t>(probs.size())})};
    StepResult result = env.step(action);
    require_finite(result.observation, env.name(), steps.size() + 1);

    Transition tr;
    tr.state = std::move(obs);
    tr.action = action;
    tr.reward = result.reward;
    tr.terminal = result.terminal && !result.truncated;
    tr.breakdown = result.breakdown;
    steps.push_back(std::move(tr));

    if (result.terminal || steps.size() >= cap) break;
    obs = std::move(result.observation);
  }
  return Trajectory(std::move(steps), Orientation::Forward);
}

}  // namespace revcurl
