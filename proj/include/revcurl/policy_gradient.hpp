#pragma once

#include <span>
#include <vector>

namespace revcurl {

// G_t for every forward timestep t, with G_t = r_t + gamma * G_{t+1}.
struct ReturnSeries {
  std::vector<double> values;
  double gamma = 0.99;
};

struct NormalizedReturnSeries {
  std::vector<double> values;
  double source_mean = 0.0;
  double source_std = 0.0;  // population standard deviation
};

inline constexpr double kNormalizationEpsilon = 1e-8;

// Backward recursion over `rewards` (forward order). Throws
// PreconditionError on empty input or gamma outside [0, 1].
ReturnSeries discounted_returns(std::span<const double> rewards, double gamma);

// (G_t - mean) / (std + 1e-8) with the population std. A constant series
// (including a single element) maps to all zeros.
NormalizedReturnSeries normalize_returns(const ReturnSeries& returns);

// Per-timestep terms of the policy objective. The learning signal is a plain
// number, so a baseline folded into it carries no gradient.
struct PolicyLossTerm {
  double objective = 0.0;     // signal * log pi, maximised
  double d_logprob = 0.0;     // d objective / d log pi
};

PolicyLossTerm step_policy_loss(double logprob, double signal);

struct ValueLossTerm {
  double loss = 0.0;     // (V - G)^2
  double d_value = 0.0;  // 2 (V - G)
};

ValueLossTerm step_value_loss(double value, double target_return);

}  // namespace revcurl
