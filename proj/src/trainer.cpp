#include "revcurl/trainer.hpp"

#include <fmt/format.h>

#include <cmath>

#include "revcurl/errors.hpp"
#include "revcurl/policy_gradient.hpp"
#include "revcurl/rng.hpp"

namespace revcurl {

std::string AlgorithmVariant::label() const {
  std::string s(to_string(ordering));
  if (baseline) s += "+baseline";
  if (normalize_returns) s += "+norm";
  if (update_mode == UpdateMode::BatchedPerEpisode) s += "+batched";
  if (discount_weighting) s += "+discounted";
  return s;
}

std::string_view to_string(Ordering ordering) {
  return ordering == Ordering::Forward ? "forward" : "backward";
}

Ordering parse_ordering(std::string_view name) {
  if (name == "forward") return Ordering::Forward;
  if (name == "backward") return Ordering::Backward;
  throw ConfigError(fmt::format("unknown ordering '{}'", name));
}

TrainState make_train_state(const NetworkSpec& spec, bool with_value, OptimizerKind optimizer,
                            double learning_rate, std::uint64_t master_seed) {
  std::vector<std::size_t> sizes{spec.observation_dim};
  sizes.insert(sizes.end(), spec.hidden_layers.begin(), spec.hidden_layers.end());

  std::vector<std::size_t> policy_sizes = sizes;
  policy_sizes.push_back(spec.action_count);
  TrainState state;
  state.policy = init_params(policy_sizes, derive_seed(master_seed, StreamPurpose::PolicyInit), spec.activation);
  state.policy_opt = OptimizerState::make(optimizer, learning_rate, state.policy);
  if (with_value) {
    std::vector<std::size_t> value_sizes = sizes;
    value_sizes.push_back(1);
    state.value = init_params(value_sizes, derive_seed(master_seed, StreamPurpose::ValueInit), spec.activation);
    state.value_opt = OptimizerState::make(optimizer, learning_rate, *state.value);
  }
  return state;
}

std::vector<ScheduledStep> schedule_updates(const Trajectory& forward_traj,
                                            std::span<const double> signals, Ordering ordering) {
  if (forward_traj.orientation() != Orientation::Forward)
    throw PreconditionError("updates are scheduled from a forward-oriented trajectory");
  if (signals.size() != forward_traj.size())
    throw PreconditionError("signal series length does not match the trajectory");
  const std::size_t n = forward_traj.size();
  std::vector<ScheduledStep> schedule;
  schedule.reserve(n);
  if (ordering == Ordering::Forward) {
    for (std::size_t t = 0; t < n; ++t) schedule.push_back({t, &forward_traj[t], signals[t]});
  } else {
    // Walk the reversed sequence; position k holds forward timestep n-1-k.
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t t = n - 1 - k;
      schedule.push_back({t, &forward_traj[t], signals[t]});
    }
  }
  return schedule;
}

bool returns_indexing_check(const Trajectory& forward_traj, double gamma) {
  const ReturnSeries returns = discounted_returns(forward_traj.rewards(), gamma);
  const Trajectory reversed = reverse_trajectory(forward_traj);
  const std::size_t n = forward_traj.size();
  for (Ordering ordering : {Ordering::Forward, Ordering::Backward}) {
    const auto schedule = schedule_updates(forward_traj, returns.values, ordering);
    const Trajectory& view = ordering == Ordering::Forward ? forward_traj : reversed;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t expected = ordering == Ordering::Forward ? k : n - 1 - k;
      const ScheduledStep& s = schedule[k];
      const Transition& seen = view[k];
      if (s.forward_index != expected || !(s.transition->state == seen.state) ||
          !(s.transition->action == seen.action) || s.signal != returns.values[expected]) {
        throw IndexingFault(fmt::format("{} position {} is not paired with forward timestep {}",
                                        to_string(ordering), k, expected));
      }
    }
  }
  return true;
}

std::vector<double> processing_signals(const Trajectory& forward_traj, double gamma, Ordering ordering) {
  const ReturnSeries returns = discounted_returns(forward_traj.rewards(), gamma);
  std::vector<double> out;
  for (const auto& s : schedule_updates(forward_traj, returns.values, ordering)) out.push_back(s.signal);
  return out;
}

GradientSet episode_policy_gradient(const ParamSet& policy, const Trajectory& forward_traj,
                                    std::span<const double> signals) {
  GradientSet total(policy.layer_sizes(), policy.activation());
  GradientSet step;
  for (const auto& s : schedule_updates(forward_traj, signals, Ordering::Forward)) {
    logprob_grad_into(policy, s.transition->state, s.transition->action, step);
    step *= s.signal;
    total += step;
  }
  return total;
}

namespace {

void check_divergence(const ParamSet& params, const char* which) {
  if (!params.all_finite()) throw NumericalFault(fmt::format("{} parameters became non-finite", which));
  const double m = params.max_abs();
  if (m > kDivergenceBound)
    throw DivergenceFault(fmt::format("{} parameter magnitude {:.6g} exceeds {:.0e}", which, m, kDivergenceBound));
}

}  // namespace

void train_episode(TrainState& state, const Trajectory& forward_traj, const AlgorithmVariant& variant,
                   double gamma) {
  if (forward_traj.orientation() != Orientation::Forward)
    throw PreconditionError("train_episode expects a forward-oriented trajectory");
  if (variant.baseline && (!state.value || !state.value_opt))
    throw PreconditionError("baseline variant requires a value network");

  // Returns are fixed for the whole episode.
  const ReturnSeries returns = discounted_returns(forward_traj.rewards(), gamma);
  std::vector<double> signals =
      variant.normalize_returns ? normalize_returns(returns).values : returns.values;
  const auto schedule = schedule_updates(forward_traj, signals, variant.ordering);

  const bool per_step = variant.update_mode == UpdateMode::PerStep;
  GradientSet policy_grad;
  GradientSet value_grad_buf;
  GradientSet policy_total;
  GradientSet value_total;
  if (!per_step) {
    policy_total = GradientSet(state.policy.layer_sizes(), state.policy.activation());
    if (variant.baseline) value_total = GradientSet(state.value->layer_sizes(), state.value->activation());
  }

  std::size_t position = 0;
  std::size_t timestep = 0;
  try {
    for (position = 0; position < schedule.size(); ++position) {
      const ScheduledStep& s = schedule[position];
      timestep = s.forward_index;
      const Transition& tr = *s.transition;

      double baseline_value = 0.0;
      if (variant.baseline) baseline_value = value_grad_into(*state.value, tr.state, value_grad_buf);

      double signal = s.signal - baseline_value;
      if (variant.discount_weighting) signal *= std::pow(gamma, static_cast<double>(s.forward_index));

      const double logprob = logprob_grad_into(state.policy, tr.state, tr.action, policy_grad);
      const PolicyLossTerm term = step_policy_loss(logprob, signal);
      policy_grad *= term.d_logprob;

      ValueLossTerm vterm;
      if (variant.baseline) {
        vterm = step_value_loss(baseline_value, s.signal);
        value_grad_buf *= vterm.d_value;
      }

      if (per_step) {
        apply_update(state.policy, policy_grad, state.policy_opt, Direction::Ascent);
        check_divergence(state.policy, "policy");
        if (variant.baseline) {
          apply_update(*state.value, value_grad_buf, *state.value_opt, Direction::Descent);
          check_divergence(*state.value, "value");
        }
      } else {
        policy_total += policy_grad;
        if (variant.baseline) value_total += value_grad_buf;
      }
    }
    if (!per_step) {
      apply_update(state.policy, policy_total, state.policy_opt, Direction::Ascent);
      check_divergence(state.policy, "policy");
      if (variant.baseline) {
        apply_update(*state.value, value_total, *state.value_opt, Direction::Descent);
        check_divergence(*state.value, "value");
      }
    }
  } catch (const DivergenceFault& e) {
    throw DivergenceFault(fmt::format("episode {} timestep {} variant {}: {}", state.episode_index,
                                      timestep, variant.label(), e.what()));
  } catch (const NumericalFault& e) {
    throw NumericalFault(fmt::format("episode {} timestep {} variant {}: {}", state.episode_index,
                                     timestep, variant.label(), e.what()),
                         e.layer());
  }
  state.timesteps_processed += schedule.size();
  ++state.episode_index;
}

}  // namespace revcurl
