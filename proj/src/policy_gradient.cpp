#include "revcurl/policy_gradient.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "revcurl/errors.hpp"

namespace revcurl {

ReturnSeries discounted_returns(std::span<const double> rewards, double gamma) {
  if (rewards.empty()) throw PreconditionError("cannot compute returns of an empty reward sequence");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw PreconditionError("discount must lie in [0, 1]");
  ReturnSeries out;
  out.gamma = gamma;
  out.values.resize(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    running = rewards[t] + gamma * running;
    out.values[t] = running;
  }
  return out;
}

NormalizedReturnSeries normalize_returns(const ReturnSeries& returns) {
  const auto& g = returns.values;
  if (g.empty()) throw PreconditionError("cannot normalize an empty return series");
  NormalizedReturnSeries out;
  out.values.assign(g.size(), 0.0);

  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= static_cast<double>(g.size());
  double var = 0.0;
  for (double v : g) var += (v - mean) * (v - mean);
  var /= static_cast<double>(g.size());
  out.source_mean = mean;
  out.source_std = std::sqrt(var);

  const bool constant = std::all_of(g.begin(), g.end(), [&](double v) { return v == g.front(); });
  if (constant) return out;
  const double denom = out.source_std + kNormalizationEpsilon;
  for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = (g[i] - mean) / denom;
  return out;
}

PolicyLossTerm step_policy_loss(double logprob, double signal) {
  if (!std::isfinite(logprob) || !std::isfinite(signal))
    throw NumericalFault("non-finite policy loss input (logprob " + std::to_string(logprob) +
                         ", signal " + std::to_string(signal) + ")");
  return {signal * logprob, signal};
}

ValueLossTerm step_value_loss(double value, double target_return) {
  if (!std::isfinite(value) || !std::isfinite(target_return))
    throw NumericalFault("non-finite value loss input");
  const double diff = value - target_return;
  return {diff * diff, 2.0 * diff};
}

}  // namespace revcurl
