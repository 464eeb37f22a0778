#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "revcurl/mdp.hpp"
#include "revcurl/nn.hpp"

namespace revcurl {

enum class Ordering { Forward, Backward };
enum class UpdateMode { PerStep, BatchedPerEpisode };

struct AlgorithmVariant {
  Ordering ordering = Ordering::Forward;
  bool baseline = false;
  UpdateMode update_mode = UpdateMode::PerStep;
  bool normalize_returns = false;
  // Multiply each step's signal by gamma^t (textbook REINFORCE). Off by
  // default: every timestep is weighted by its return alone.
  bool discount_weighting = false;

  // Plain REINFORCE in the given order, optionally with a value baseline.
  static AlgorithmVariant reinforce(Ordering ordering, bool baseline = false) {
    return {ordering, baseline, UpdateMode::PerStep, false, false};
  }

  // e.g. "backward+baseline+norm"
  std::string label() const;

  friend bool operator==(const AlgorithmVariant&, const AlgorithmVariant&) = default;
};

std::string_view to_string(Ordering ordering);
Ordering parse_ordering(std::string_view name);

// Parameters exceeding this magnitude abort training with a DivergenceFault.
inline constexpr double kDivergenceBound = 1e6;

struct TrainState {
  ParamSet policy;
  std::optional<ParamSet> value;
  OptimizerState policy_opt;
  std::optional<OptimizerState> value_opt;
  std::uint64_t episode_index = 0;
  std::uint64_t timesteps_processed = 0;
};

struct NetworkSpec {
  std::size_t observation_dim = 0;
  std::size_t action_count = 0;
  std::vector<std::size_t> hidden_layers{128, 128};
  Activation activation = Activation::Tanh;
};

// Fresh networks and optimizers; weights come from the PolicyInit / ValueInit
// streams of `master_seed`.
TrainState make_train_state(const NetworkSpec& spec, bool with_value, OptimizerKind optimizer,
                            double learning_rate, std::uint64_t master_seed);

// One step of the update schedule: which forward timestep is processed and
// the learning signal paired with it.
struct ScheduledStep {
  std::size_t forward_index = 0;
  const Transition* transition = nullptr;
  double signal = 0.0;
};

// Pairs each step with signals[forward index]. For Backward the steps are
// taken from the reversed trajectory; signals are never recomputed from the
// reversed rewards.
std::vector<ScheduledStep> schedule_updates(const Trajectory& forward_traj,
                                            std::span<const double> signals, Ordering ordering);

// Checks that, for both orderings, the k-th processed step carries the
// state, action and return of forward timestep k (Forward) or T-1-k
// (Backward). Throws IndexingFault on any mismatch; returns true otherwise.
bool returns_indexing_check(const Trajectory& forward_traj, double gamma);

// Returns in the order the given ordering processes them.
std::vector<double> processing_signals(const Trajectory& forward_traj, double gamma, Ordering ordering);

// sum_t signals[t] * grad log pi(a_t | s_t) at fixed parameters.
GradientSet episode_policy_gradient(const ParamSet& policy, const Trajectory& forward_traj,
                                    std::span<const double> signals);

// Trains on one collected episode. Returns are computed once up front; each
// processed timestep then runs a fresh forward/backward pass at the current
// parameters (PerStep) or contributes to one accumulated step (Batched).
// Throws NumericalFault / DivergenceFault carrying episode, timestep and
// variant in the message.
void train_episode(TrainState& state, const Trajectory& forward_traj, const AlgorithmVariant& variant,
                   double gamma);

}  // namespace revcurl
