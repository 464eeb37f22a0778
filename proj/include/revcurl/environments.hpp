#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>

#include "revcurl/mdp.hpp"
#include "revcurl/nn.hpp"

namespace revcurl {

// ---------------------------------------------------------------------------
// CartPole: classic cart-pole dynamics, explicit Euler.

namespace cartpole {
inline constexpr double kGravity = 9.8;
inline constexpr double kCartMass = 1.0;
inline constexpr double kPoleMass = 0.1;
inline constexpr double kTotalMass = kCartMass + kPoleMass;
inline constexpr double kHalfPoleLength = 0.5;
inline constexpr double kPoleMassLength = kPoleMass * kHalfPoleLength;
inline constexpr double kForceMag = 10.0;
inline constexpr double kTau = 0.02;
inline constexpr double kXThreshold = 2.4;
inline constexpr double kThetaThreshold = 12.0 * 2.0 * std::numbers::pi / 360.0;
inline constexpr double kResetBound = 0.05;
inline constexpr std::size_t kMaxSteps = 500;
inline constexpr double kSolvedScore = 500.0;
}  // namespace cartpole

struct CartPoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;

  Observation observation() const;
  friend bool operator==(const CartPoleState&, const CartPoleState&) = default;
};

class CartPole final : public Environment {
 public:
  // Action 0 pushes left (-10 N), action 1 pushes right (+10 N).
  static CartPoleState dynamics(const CartPoleState& state, ActionId action);
  static bool out_of_bounds(const CartPoleState& state);

  Observation reset(std::uint64_t seed) override;
  StepResult step(ActionId action) override;

  std::size_t observation_dim() const override { return 4; }
  std::size_t action_count() const override { return 2; }
  std::size_t max_episode_steps() const override { return cartpole::kMaxSteps; }
  std::string_view name() const override { return "cartpole"; }

  // Places the environment in an arbitrary live state (step counter cleared).
  void set_state(const CartPoleState& state);
  const CartPoleState& state() const { return state_; }

 private:
  CartPoleState state_;
  std::size_t steps_ = 0;
  bool done_ = true;
};

// ---------------------------------------------------------------------------
// LanderLite: a planar lander with the four-action interface, 8-dim
// observation and reward structure of the usual lunar-lander task, but with
// its own simplified rigid-body model instead of a physics engine.
//
// World: flat ground at height 0, landing pad centred at x = 0 between the
// flags at +-kPadHalfWidth. `py` is the height of the leg tips when the body
// is level, so an upright lander touches down at py = 0.
//
// Per step (semi-implicit Euler, dt = 1/kFps):
//   main engine  : acceleration kMainAccel along the body's up axis
//   side engines : acceleration kSideAccel along the body's +-x axis and
//                  angular acceleration -+kSideAngularAccel
//   gravity      : kGravity on vy
// A leg is in contact when its tip is at or below the ground. Touching the
// ground faster than kCrashSpeed downward, or tilted beyond kMaxLandingTilt,
// is a crash; otherwise the ground holds the lander up, damps horizontal and
// angular motion, and settles the tilt. Leaving |x| < kHalfWidth or rising
// above kCeiling is also a crash. With both legs down and speeds under
// kRestSpeed the lander is at rest and the episode ends.
//
// Reward = shaping + contact + fuel + terminal where
//   shaping  = potential(s') - potential(s),
//              potential = -kShapeDistance*|(o0,o1)| - kShapeSpeed*|(o2,o3)| - kShapeTilt*|o4|
//   contact  = +kContactBonus the first time each leg touches down
//   fuel     = -kMainFuelCost per main-engine step, -kSideFuelCost per side-engine step
//   terminal = -kCrashPenalty on crash, +kLandingBonus on coming to rest
//              between the flags (0 when at rest outside them)

namespace landerlite {
inline constexpr double kFps = 50.0;
inline constexpr double kDt = 1.0 / kFps;
inline constexpr double kGravity = -10.0;
inline constexpr double kMainAccel = 16.0;
inline constexpr double kSideAccel = 1.5;
inline constexpr double kSideAngularAccel = 3.0;
inline constexpr double kHalfWidth = 10.0;
inline constexpr double kHalfHeight = 20.0 / 3.0;
inline constexpr double kStartHeight = 9.0;
inline constexpr double kCeiling = 18.0;
inline constexpr double kPadHalfWidth = 2.0;
inline constexpr double kLegSpread = 0.5;
inline constexpr double kLegDepth = 0.6;
inline constexpr double kCrashSpeed = 2.0;
inline constexpr double kMaxLandingTilt = 0.5;
inline constexpr double kGroundFriction = 0.9;
inline constexpr double kGroundAngularDamping = 0.8;
inline constexpr double kGroundLevelling = 0.9;
inline constexpr double kRestSpeed = 0.05;
inline constexpr double kShapeDistance = 100.0;
inline constexpr double kShapeSpeed = 100.0;
inline constexpr double kShapeTilt = 100.0;
inline constexpr double kContactBonus = 10.0;
inline constexpr double kMainFuelCost = 0.3;
inline constexpr double kSideFuelCost = 0.03;
inline constexpr double kCrashPenalty = 100.0;
inline constexpr double kLandingBonus = 100.0;
inline constexpr std::size_t kMaxSteps = 1000;
inline constexpr double kSolvedScore = 200.0;
}  // namespace landerlite

struct LanderLiteState {
  double px = 0.0;
  double py = 0.0;
  double vx = 0.0;
  double vy = 0.0;
  double angle = 0.0;
  double angular_velocity = 0.0;
  bool left_contact = false;
  bool right_contact = false;

  Observation observation() const;
  double potential() const;
  friend bool operator==(const LanderLiteState&, const LanderLiteState&) = default;
};

class LanderLite final : public Environment {
 public:
  enum Action : std::size_t { Rest = 0, FireLeft = 1, FireMain = 2, FireRight = 3 };

  Observation reset(std::uint64_t seed) override;
  StepResult step(ActionId action) override;

  std::size_t observation_dim() const override { return 8; }
  std::size_t action_count() const override { return 4; }
  std::size_t max_episode_steps() const override { return landerlite::kMaxSteps; }
  std::string_view name() const override { return "landerlite"; }

  void set_state(const LanderLiteState& state);
  const LanderLiteState& state() const { return state_; }

  static bool is_solved_score(double episode_score) { return episode_score >= landerlite::kSolvedScore; }

 private:
  LanderLiteState state_;
  bool left_touched_ = false;
  bool right_touched_ = false;
  std::size_t steps_ = 0;
  bool done_ = true;
};

// ---------------------------------------------------------------------------
// ChainMDP: cells 0..N-1, start in cell 0, action 0 moves left (clamped at 0),
// action 1 moves right. Entering cell N-1 ends the episode with reward 1.0;
// every other step pays 0. Observations are one-hot cell indicators.

class ChainMdp final : public Environment {
 public:
  static constexpr std::size_t kMaxEnumerableStates = 6;
  static constexpr std::size_t kMaxEnumerableSteps = 12;

  explicit ChainMdp(std::size_t num_states = 5, std::size_t max_steps = 12);

  Observation reset(std::uint64_t seed) override;
  StepResult step(ActionId action) override;

  std::size_t observation_dim() const override { return num_states_; }
  std::size_t action_count() const override { return 2; }
  std::size_t max_episode_steps() const override { return max_steps_; }
  std::string_view name() const override { return "chain"; }

  std::size_t num_states() const { return num_states_; }
  std::size_t cell() const { return cell_; }
  Observation observation_for(std::size_t cell) const;

 private:
  std::size_t num_states_;
  std::size_t max_steps_;
  std::size_t cell_ = 0;
  std::size_t steps_ = 0;
  bool done_ = true;
};

// Exact gradient of E[G_0] with respect to the flattened policy parameters,
// by enumerating every action sequence up to the chain's step cap.
// `reward_scale` multiplies every reward. Throws OracleBudgetError when the
// chain is larger than kMaxEnumerableStates or its cap exceeds
// kMaxEnumerableSteps.
Eigen::VectorXd chainmdp_exact_gradient(const ChainMdp& chain, const ParamSet& policy, double gamma,
                                        double reward_scale = 1.0);

// Expected return E[G_0] under the same enumeration.
double chainmdp_expected_return(const ChainMdp& chain, const ParamSet& policy, double gamma);

// ---------------------------------------------------------------------------

enum class EnvKind { CartPole, LanderLite, Chain };

std::string_view to_string(EnvKind kind);
EnvKind parse_env_kind(std::string_view name);
std::unique_ptr<Environment> make_environment(EnvKind kind);

// Writes every environment constant as `key = value` lines.
std::string environment_constants_text();
void write_environment_constants(const std::filesystem::path& path);

}  // namespace revcurl
