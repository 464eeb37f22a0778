#include "revcurl/environments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>

#include "revcurl/errors.hpp"
#include "revcurl/rng.hpp"

namespace revcurl {

// ---------------------------------------------------------------------------
// CartPole

Observation CartPoleState::observation() const {
  Observation o(4);
  o << x, x_dot, theta, theta_dot;
  return o;
}

CartPoleState CartPole::dynamics(const CartPoleState& s, ActionId action) {
  using namespace cartpole;
  if (action.index > 1) throw PreconditionError("cartpole action must be 0 or 1");
  const double force = action.index == 1 ? kForceMag : -kForceMag;
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);
  const double temp = (force + kPoleMassLength * s.theta_dot * s.theta_dot * sin_t) / kTotalMass;
  const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (kHalfPoleLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

  CartPoleState next;
  next.x = s.x + kTau * s.x_dot;
  next.x_dot = s.x_dot + kTau * x_acc;
  next.theta = s.theta + kTau * s.theta_dot;
  next.theta_dot = s.theta_dot + kTau * theta_acc;
  return next;
}

bool CartPole::out_of_bounds(const CartPoleState& s) {
  return std::abs(s.x) > cartpole::kXThreshold || std::abs(s.theta) > cartpole::kThetaThreshold;
}

Observation CartPole::reset(std::uint64_t seed) {
  Rng rng(seed);
  const double b = cartpole::kResetBound;
  state_.x = rng.uniform(-b, b);
  state_.x_dot = rng.uniform(-b, b);
  state_.theta = rng.uniform(-b, b);
  state_.theta_dot = rng.uniform(-b, b);
  steps_ = 0;
  done_ = false;
  return state_.observation();
}

void CartPole::set_state(const CartPoleState& state) {
  state_ = state;
  steps_ = 0;
  done_ = out_of_bounds(state);
}

StepResult CartPole::step(ActionId action) {
  if (done_) throw ContractViolation("cartpole stepped after the episode ended; call reset()");
  state_ = dynamics(state_, action);
  ++steps_;
  StepResult r;
  r.observation = state_.observation();
  r.reward = 1.0;
  r.breakdown.base = 1.0;
  const bool failed = out_of_bounds(state_);
  r.truncated = !failed && steps_ >= cartpole::kMaxSteps;
  r.terminal = failed || r.truncated;
  done_ = r.terminal;
  return r;
}

// ---------------------------------------------------------------------------
// LanderLite

namespace {

// Height of a leg tip; side = -1 for the left leg, +1 for the right leg.
double leg_tip_height(const LanderLiteState& s, double side) {
  using namespace landerlite;
  return s.py + kLegDepth - kLegDepth * std::cos(s.angle) + side * kLegSpread * std::sin(s.angle);
}

constexpr double kContactTolerance = 0.02;

}  // namespace

Observation LanderLiteState::observation() const {
  using namespace landerlite;
  Observation o(8);
  o << px / kHalfWidth, py / kHalfHeight, vx * kHalfWidth / kFps, vy * kHalfHeight / kFps, angle,
      20.0 * angular_velocity / kFps, left_contact ? 1.0 : 0.0, right_contact ? 1.0 : 0.0;
  return o;
}

double LanderLiteState::potential() const {
  using namespace landerlite;
  const Observation o = observation();
  return -kShapeDistance * std::hypot(o(0), o(1)) - kShapeSpeed * std::hypot(o(2), o(3)) -
         kShapeTilt * std::abs(o(4));
}

Observation LanderLite::reset(std::uint64_t seed) {
  using namespace landerlite;
  Rng rng(seed);
  state_ = LanderLiteState{};
  state_.px = 0.0;
  state_.py = kStartHeight;
  state_.vx = rng.uniform(-1.0, 1.0);
  state_.vy = rng.uniform(-1.0, 0.0);
  state_.angle = rng.uniform(-0.05, 0.05);
  state_.angular_velocity = rng.uniform(-0.1, 0.1);
  left_touched_ = right_touched_ = false;
  steps_ = 0;
  done_ = false;
  return state_.observation();
}

void LanderLite::set_state(const LanderLiteState& state) {
  state_ = state;
  left_touched_ = state.left_contact;
  right_touched_ = state.right_contact;
  steps_ = 0;
  done_ = false;
}

StepResult LanderLite::step(ActionId action) {
  using namespace landerlite;
  if (done_) throw ContractViolation("landerlite stepped after the episode ended; call reset()");
  if (action.index > 3) throw PreconditionError("landerlite action must be in 0..3");

  const double before = state_.potential();
  LanderLiteState& s = state_;
  RewardBreakdown parts;

  const double sin_a = std::sin(s.angle);
  const double cos_a = std::cos(s.angle);
  double ax = 0.0;
  double ay = kGravity;
  double alpha = 0.0;
  switch (action.index) {
    case FireMain:
      ax += -sin_a * kMainAccel;
      ay += cos_a * kMainAccel;
      parts.fuel -= kMainFuelCost;
      break;
    case FireLeft:
      ax += cos_a * kSideAccel;
      ay += sin_a * kSideAccel;
      alpha = -kSideAngularAccel;
      parts.fuel -= kSideFuelCost;
      break;
    case FireRight:
      ax -= cos_a * kSideAccel;
      ay -= sin_a * kSideAccel;
      alpha = kSideAngularAccel;
      parts.fuel -= kSideFuelCost;
      break;
    default:
      break;
  }
  s.vx += ax * kDt;
  s.vy += ay * kDt;
  s.angular_velocity += alpha * kDt;
  s.px += s.vx * kDt;
  s.py += s.vy * kDt;
  s.angle += s.angular_velocity * kDt;

  bool crashed = false;
  const double left_tip = leg_tip_height(s, -1.0);
  const double right_tip = leg_tip_height(s, 1.0);
  if (left_tip <= 0.0 || right_tip <= 0.0) {
    if (s.vy < -kCrashSpeed || std::abs(s.angle) > kMaxLandingTilt) {
      crashed = true;
      s.left_contact = left_tip <= 0.0;
      s.right_contact = right_tip <= 0.0;
    } else {
      s.py -= std::min(left_tip, right_tip);
      s.vy = std::max(s.vy, 0.0);
      s.vx *= kGroundFriction;
      s.angular_velocity *= kGroundAngularDamping;
      s.angle *= kGroundLevelling;
      s.left_contact = leg_tip_height(s, -1.0) <= kContactTolerance;
      s.right_contact = leg_tip_height(s, 1.0) <= kContactTolerance;
    }
  } else {
    s.left_contact = false;
    s.right_contact = false;
  }
  if (std::abs(s.px) >= kHalfWidth || s.py > kCeiling) crashed = true;

  if (!crashed) {
    if (s.left_contact && !left_touched_) {
      left_touched_ = true;
      parts.contact += kContactBonus;
    }
    if (s.right_contact && !right_touched_) {
      right_touched_ = true;
      parts.contact += kContactBonus;
    }
  }

  parts.shaping = s.potential() - before;
  ++steps_;

  StepResult r;
  if (crashed) {
    parts.terminal = -kCrashPenalty;
    r.terminal = true;
  } else if (s.left_contact && s.right_contact && std::abs(s.vx) < kRestSpeed &&
             std::abs(s.vy) < kRestSpeed && std::abs(s.angular_velocity) < kRestSpeed) {
    parts.terminal = std::abs(s.px) <= kPadHalfWidth ? kLandingBonus : 0.0;
    r.terminal = true;
  } else if (steps_ >= kMaxSteps) {
    r.terminal = true;
    r.truncated = true;
  }
  r.observation = s.observation();
  r.breakdown = parts;
  r.reward = parts.total();
  done_ = r.terminal;
  return r;
}

// ---------------------------------------------------------------------------
// ChainMDP

ChainMdp::ChainMdp(std::size_t num_states, std::size_t max_steps)
    : num_states_(num_states), max_steps_(max_steps) {
  if (num_states_ < 2) throw ConfigError("chain needs at least two cells");
  if (max_steps_ == 0) throw ConfigError("chain step cap must be positive");
}

Observation ChainMdp::observation_for(std::size_t cell) const {
  Observation o = Observation::Zero(static_cast<Eigen::Index>(num_states_));
  o(static_cast<Eigen::Index>(cell)) = 1.0;
  return o;
}

Observation ChainMdp::reset(std::uint64_t /*seed*/) {
  cell_ = 0;
  steps_ = 0;
  done_ = false;
  return observation_for(cell_);
}

StepResult ChainMdp::step(ActionId action) {
  if (done_) throw ContractViolation("chain stepped after the episode ended; call reset()");
  if (action.index > 1) throw PreconditionError("chain action must be 0 or 1");
  cell_ = action.index == 1 ? cell_ + 1 : (cell_ == 0 ? 0 : cell_ - 1);
  ++steps_;
  StepResult r;
  r.observation = observation_for(cell_);
  if (cell_ == num_states_ - 1) {
    r.reward = 1.0;
    r.breakdown.base = 1.0;
    r.terminal = true;
  } else if (steps_ >= max_steps_) {
    r.terminal = true;
    r.truncated = true;
  }
  done_ = r.terminal;
  return r;
}

namespace {

struct ChainEnumeration {
  double expected_return = 0.0;
  Eigen::VectorXd gradient;
};

ChainEnumeration enumerate_chain(const ChainMdp& chain, const ParamSet& policy, double gamma,
                                 double reward_scale) {
  const std::size_t n = chain.num_states();
  const std::size_t cap = chain.max_episode_steps();
  if (n > ChainMdp::kMaxEnumerableStates || cap > ChainMdp::kMaxEnumerableSteps) {
    throw OracleBudgetError(fmt::format(
        "chain enumeration budget exceeded: {} states / {} steps (limit {} / {})", n, cap,
        ChainMdp::kMaxEnumerableStates, ChainMdp::kMaxEnumerableSteps));
  }
  if (policy.input_dim() != n || policy.output_dim() != 2)
    throw ShapeError("policy shape does not fit the chain");

  // Per-cell action probabilities and score vectors.
  std::vector<Eigen::VectorXd> probs(n);
  std::vector<std::array<Eigen::VectorXd, 2>> scores(n);
  for (std::size_t c = 0; c + 1 < n; ++c) {
    const Observation obs = chain.observation_for(c);
    probs[c] = policy_forward(policy, obs);
    for (std::size_t a = 0; a < 2; ++a) scores[c][a] = logprob_grad(policy, obs, ActionId{a}).grad.flatten();
  }

  ChainEnumeration out;
  out.gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.parameter_count()));
  Eigen::VectorXd score_sum = Eigen::VectorXd::Zero(out.gradient.size());

  std::function<void(std::size_t, std::size_t, double, double, double)> visit =
      [&](std::size_t cell, std::size_t depth, double prob, double ret, double discount) {
        for (std::size_t a = 0; a < 2; ++a) {
          const double p = probs[cell](static_cast<Eigen::Index>(a));
          if (p == 0.0) continue;
          const std::size_t next = a == 1 ? cell + 1 : (cell == 0 ? 0 : cell - 1);
          const double reward = next == n - 1 ? reward_scale : 0.0;
          const double g = ret + discount * reward;
          score_sum += scores[cell][a];
          if (next == n - 1 || depth + 1 == cap) {
            out.expected_return += prob * p * g;
            out.gradient += (prob * p * g) * score_sum;
          } else {
            visit(next, depth + 1, prob * p, g, discount * gamma);
          }
          score_sum -= scores[cell][a];
        }
      };
  visit(0, 0, 1.0, 0.0, 1.0);
  return out;
}

}  // namespace

Eigen::VectorXd chainmdp_exact_gradient(const ChainMdp& chain, const ParamSet& policy, double gamma,
                                        double reward_scale) {
  return enumerate_chain(chain, policy, gamma, reward_scale).gradient;
}

double chainmdp_expected_return(const ChainMdp& chain, const ParamSet& policy, double gamma) {
  return enumerate_chain(chain, policy, gamma, 1.0).expected_return;
}

// ---------------------------------------------------------------------------

std::string_view to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::CartPole: return "cartpole";
    case EnvKind::LanderLite: return "landerlite";
    case EnvKind::Chain: return "chain";
  }
  return "?";
}

EnvKind parse_env_kind(std::string_view name) {
  if (name == "cartpole") return EnvKind::CartPole;
  if (name == "landerlite") return EnvKind::LanderLite;
  if (name == "chain") return EnvKind::Chain;
  throw ConfigError(fmt::format("unknown environment '{}'", name));
}

std::unique_ptr<Environment> make_environment(EnvKind kind) {
  switch (kind) {
    case EnvKind::CartPole: return std::make_unique<CartPole>();
    case EnvKind::LanderLite: return std::make_unique<LanderLite>();
    case EnvKind::Chain: return std::make_unique<ChainMdp>();
  }
  throw ConfigError("unknown environment kind");
}

std::string environment_constants_text() {
  std::string out;
  auto put = [&out](std::string_view key, double value) {
    out += fmt::format("{} = {}\n", key, value);
  };
  out += "[cartpole]\n";
  put("gravity", cartpole::kGravity);
  put("cart_mass", cartpole::kCartMass);
  put("pole_mass", cartpole::kPoleMass);
  put("half_pole_length", cartpole::kHalfPoleLength);
  put("force_mag", cartpole::kForceMag);
  put("tau", cartpole::kTau);
  put("x_threshold", cartpole::kXThreshold);
  put("theta_threshold_radians", cartpole::kThetaThreshold);
  put("reset_bound", cartpole::kResetBound);
  put("max_steps", static_cast<double>(cartpole::kMaxSteps));
  put("solved_score", cartpole::kSolvedScore);
  out += "\n[landerlite]\n";
  put("fps", landerlite::kFps);
  put("gravity", landerlite::kGravity);
  put("main_accel", landerlite::kMainAccel);
  put("side_accel", landerlite::kSideAccel);
  put("side_angular_accel", landerlite::kSideAngularAccel);
  put("half_width", landerlite::kHalfWidth);
  put("half_height", landerlite::kHalfHeight);
  put("start_height", landerlite::kStartHeight);
  put("ceiling", landerlite::kCeiling);
  put("pad_half_width", landerlite::kPadHalfWidth);
  put("leg_spread", landerlite::kLegSpread);
  put("leg_depth", landerlite::kLegDepth);
  put("crash_speed", landerlite::kCrashSpeed);
  put("max_landing_tilt", landerlite::kMaxLandingTilt);
  put("ground_friction", landerlite::kGroundFriction);
  put("ground_angular_damping", landerlite::kGroundAngularDamping);
  put("ground_levelling", landerlite::kGroundLevelling);
  put("rest_speed", landerlite::kRestSpeed);
  put("shape_distance", landerlite::kShapeDistance);
  put("shape_speed", landerlite::kShapeSpeed);
  put("shape_tilt", landerlite::kShapeTilt);
  put("contact_bonus", landerlite::kContactBonus);
  put("main_fuel_cost", landerlite::kMainFuelCost);
  put("side_fuel_cost", landerlite::kSideFuelCost);
  put("crash_penalty", landerlite::kCrashPenalty);
  put("landing_bonus", landerlite::kLandingBonus);
  put("max_steps", static_cast<double>(landerlite::kMaxSteps));
  put("solved_score", landerlite::kSolvedScore);
  out += "\n[chain]\n";
  put("default_states", 5);
  put("default_max_steps", 12);
  put("goal_reward", 1.0);
  put("max_enumerable_states", static_cast<double>(ChainMdp::kMaxEnumerableStates));
  put("max_enumerable_steps", static_cast<double>(ChainMdp::kMaxEnumerableSteps));
  return out;
}

void write_environment_constants(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write constants file: " + path.string());
  os << environment_constants_text();
}

}  // namespace revcurl
