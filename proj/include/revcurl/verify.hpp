#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace revcurl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 20240501;
  std::size_t gradient_configs = 10;
  double finite_difference_step = 1e-5;
  double gradient_tolerance = 1e-4;
  std::size_t return_vectors = 1000;
  std::size_t chain_states = 5;
  std::size_t chain_episodes = 100000;
};

// Central finite differences against the analytic log-prob and value-loss
// gradients on random small networks. Reports the max relative error
// |a - n| / max(|a|, |n|, 1e-8).
CheckResult check_gradient_fidelity(const VerifyOptions& options = {});

// Return recursion on random reward vectors and normalization statistics.
CheckResult check_return_math(const VerifyOptions& options = {});

// Batched SGD updates commute across orderings; per-step updates do not.
CheckResult check_order_equivalence(const VerifyOptions& options = {});

// Mean sampled REINFORCE gradient on the chain agrees with the enumerated
// exact gradient within three standard errors per coordinate (gamma = 1).
CheckResult check_chain_exact_gradient(const VerifyOptions& options = {});

// Every check above, in order.
std::vector<CheckResult> run_verification(const VerifyOptions& options = {});

}  // namespace revcurl
