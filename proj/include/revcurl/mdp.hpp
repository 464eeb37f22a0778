#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "revcurl/rng.hpp"

namespace revcurl {

using Observation = Eigen::VectorXd;

struct ActionId {
  std::size_t index = 0;

  friend bool operator==(ActionId, ActionId) = default;
};

// Additive components of one step's reward. Environments fill in whichever
// parts apply; `total()` is always the reward handed to the learner.
struct RewardBreakdown {
  double base = 0.0;
  double shaping = 0.0;
  double contact = 0.0;
  double fuel = 0.0;
  double terminal = 0.0;

  double total() const { return base + shaping + contact + fuel + terminal; }

  friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

struct Transition {
  Observation state;
  ActionId action;
  double reward = 0.0;
  // True only when the episode ended by reaching a terminal state. A step cut
  // off by the step cap keeps terminal == false.
  bool terminal = false;
  RewardBreakdown breakdown;

  friend bool operator==(const Transition& a, const Transition& b) {
    return a.state.size() == b.state.size() && a.state == b.state && a.action == b.action &&
           a.reward == b.reward && a.terminal == b.terminal && a.breakdown == b.breakdown;
  }
};

enum class Orientation { Forward, Backward };

// Immutable, non-empty episode record.
class Trajectory {
 public:
  Trajectory(std::vector<Transition> steps, Orientation orientation);

  const std::vector<Transition>& steps() const { return steps_; }
  Orientation orientation() const { return orientation_; }
  std::size_t size() const { return steps_.size(); }
  const Transition& operator[](std::size_t i) const { return steps_[i]; }

  // Rewards in the stored order.
  std::vector<double> rewards() const;
  double total_reward() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  std::vector<Transition> steps_;
  Orientation orientation_;
};

// New trajectory with the steps in reverse order and the orientation flipped.
Trajectory reverse_trajectory(const Trajectory& trajectory);

struct StepResult {
  Observation observation;
  double reward = 0.0;
  // Episode is over; the environment must be reset before stepping again.
  bool terminal = false;
  // Set together with `terminal` when the episode ended on the step cap rather
  // than in a terminal state.
  bool truncated = false;
  RewardBreakdown breakdown;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual Observation reset(std::uint64_t seed) = 0;
  virtual StepResult step(ActionId action) = 0;

  virtual std::size_t observation_dim() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual std::size_t max_episode_steps() const = 0;
  virtual std::string_view name() const = 0;
};

// Anything that maps an observation to a categorical action distribution.
class PolicySampler {
 public:
  virtual ~PolicySampler() = default;
  virtual std::size_t input_dim() const = 0;
  virtual Eigen::VectorXd action_probabilities(const Observation& obs) const = 0;
};

// Runs one episode from `env.reset(reset_seed)`, sampling every action from
// `policy` with `action_rng`. Stops on a terminal state or after
// max_episode_steps() steps.
Trajectory collect_episode(Environment& env, const PolicySampler& policy, std::uint64_t reset_seed,
                           Rng& action_rng);

}  // namespace revcurl
