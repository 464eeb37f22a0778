// Acceptance suite. Usage: acceptance [criterion ...]   (default: all)
// Prints one PASS/FAIL line per criterion; exit status 1 if any failed.

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "revcurl/harness.hpp"
#include "revcurl/verify.hpp"

using namespace revcurl;
namespace fs = std::filesystem;

namespace {

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};
constexpr double kUnsolved = std::numeric_limits<double>::infinity();

struct Verdict {
  bool passed = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path output_root() {
  const char* env = std::getenv("REVCURL_ACCEPTANCE_DIR");
  const fs::path root = env ? fs::path(env) : fs::current_path() / "acceptance_runs";
  fs::create_directories(root);
  return root;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return kUnsolved;
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt_episodes(double e) { return std::isinf(e) ? "unsolved" : fmt::format("{:g}", e); }

std::vector<double> solve_episodes(const std::vector<RunResult>& runs) {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.episodes_to_solve ? static_cast<double>(*r.episodes_to_solve) : kUnsolved);
  return out;
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + fmt_episodes(x);
  return "[" + s + "]";
}

// Runs one configuration over all seeds, with CSV logs and an SVG under
// output_root()/name.
std::vector<RunResult> run_group(const std::string& name, const TrainConfig& config) {
  const fs::path dir = output_root() / name;
  fs::remove_all(dir);
  const auto results = run_experiment(config, dir);
  emit_learning_curve(results, dir / "curve.svg");
  for (const auto& r : results)
    fmt::print("  {} seed={} episodes={} episodes_to_solve={} diverged={} mean_episode_ms={:.3f} timesteps={}\n",
               name, r.seed, r.stats.size(), r.episodes_to_solve ? std::to_string(*r.episodes_to_solve) : "none",
               r.diverged, r.mean_episode_wallclock_ms(), r.total_timesteps);
  std::fflush(stdout);
  return results;
}

TrainConfig cartpole_config(Ordering ordering, std::vector<std::size_t> hidden) {
  TrainConfig c = TrainConfig::defaults_for(EnvKind::CartPole);
  c.variant = AlgorithmVariant::reinforce(ordering, true);
  c.hidden_layers = std::move(hidden);
  c.max_episodes = 3000;
  c.seeds = kSeeds;
  c.solved_threshold = 475.0;
  return c;
}

// Shallow backward+baseline CartPole runs are shared by criteria 5 and 7.
const std::vector<RunResult>& cartpole_backward_shallow() {
  static const std::vector<RunResult> runs = run_group("c5_backward_baseline_h128x128",
                                                       cartpole_config(Ordering::Backward, {128, 128}));
  return runs;
}

Verdict check_result(const CheckResult& r, double limit_s) {
  const bool fast = r.seconds < limit_s;
  return {r.passed && fast, fmt::format("{} ({:.2f}s, limit {:.0f}s)", r.detail, r.seconds, limit_s)};
}

Verdict criterion1() {
  VerifyOptions o;
  o.gradient_configs = 10;
  o.finite_difference_step = 1e-5;
  o.gradient_tolerance = 1e-4;
  return check_result(check_gradient_fidelity(o), 10.0);
}

Verdict criterion2() {
  VerifyOptions o;
  o.return_vectors = 1000;
  return check_result(check_return_math(o), 5.0);
}

Verdict criterion3() { return check_result(check_order_equivalence(), 5.0); }

Verdict criterion4() {
  VerifyOptions o;
  o.chain_states = 5;
  o.chain_episodes = 100000;
  return check_result(check_chain_exact_gradient(o), 60.0);
}

Verdict criterion5() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto backward = solve_episodes(cartpole_backward_shallow());
  const auto forward = solve_episodes(run_group("c5_forward_baseline_h128x128", cartpole_config(Ordering::Forward, {128, 128})));
  const double elapsed = seconds_since(t0);
  const auto solved = std::count_if(backward.begin(), backward.end(), [](double e) { return !std::isinf(e); });
  const double mb = median(backward), mf = median(forward);
  const bool ok = solved >= 3 && mb <= mf && elapsed < 1800.0;
  return {ok, fmt::format("backward+baseline solved {}/5 {} median {}; forward+baseline {} median {}; "
                          "runtime {:.0f}s (target < 1800s)",
                          solved, list(backward), fmt_episodes(mb), list(forward), fmt_episodes(mf), elapsed)};
}

double return_variance(const RunResult& r, std::size_t episodes) {
  const std::size_t n = std::min(episodes, r.stats.size());
  if (n < 2) return 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += r.stats[i].total_reward;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += std::pow(r.stats[i].total_reward - mean, 2);
  return var / static_cast<double>(n - 1);
}

// Best moving average reached minus the mean of the first `window` episodes.
double improvement(const RunResult& r, std::size_t window) {
  if (r.stats.empty()) return 0.0;
  const std::size_t n = std::min(window, r.stats.size());
  double start = 0.0;
  for (std::size_t i = 0; i < n; ++i) start += r.stats[i].total_reward;
  start /= static_cast<double>(n);
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : r.stats) best = std::max(best, s.moving_avg);
  return best - start;
}

Verdict criterion6() {
  TrainConfig base = TrainConfig::defaults_for(EnvKind::LanderLite);
  base.variant = AlgorithmVariant::reinforce(Ordering::Backward, false);
  base.hidden_layers = {128, 128};
  base.seeds = kSeeds;
  base.stop_on_solve = false;

  TrainConfig raw = base;
  raw.learning_rate = 1e-3;
  raw.max_episodes = 1000;
  TrainConfig norm = raw;
  norm.variant.normalize_returns = true;
  const auto raw_runs = run_group("c6_backward_lr0.001", raw);
  const auto norm_runs = run_group("c6_backward_norm_lr0.001", norm);

  int unstable = 0;
  std::string per_seed;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const double vr = return_variance(raw_runs[i], 1000);
    const double vn = return_variance(norm_runs[i], 1000);
    const bool hit = raw_runs[i].diverged || vr >= 2.0 * vn;
    unstable += hit;
    per_seed += fmt::format(" s{}:{}{:.3g}/{:.3g}", kSeeds[i], raw_runs[i].diverged ? "diverged " : "", vr, vn);
  }

  TrainConfig slow = base;
  slow.learning_rate = 1e-4;
  slow.max_episodes = 3000;
  slow.variant.normalize_returns = true;
  const auto slow_runs = run_group("c6_backward_norm_lr0.0001", slow);
  bool any_diverged = false;
  std::vector<double> gains;
  for (const auto& r : slow_runs) {
    any_diverged = any_diverged || r.diverged || !r.fault.empty();
    gains.push_back(improvement(r, 100));
  }
  const double gain = median(gains);

  const bool ok = unstable >= 3 && !any_diverged && gain >= 100.0;
  std::string gain_list;
  for (double g : gains) gain_list += fmt::format("{}{:.1f}", gain_list.empty() ? "" : ",", g);
  return {ok, fmt::format("lr=1e-3 unnormalized diverged or variance >= 2x normalized on {}/5 seeds "
                          "(var raw/norm:{}); lr=1e-4 normalized divergence-free: {}; "
                          "median improvement {:.1f} [{}] (need >= 100)",
                          unstable, per_seed, any_diverged ? "no" : "yes", gain, gain_list)};
}

Verdict criterion7() {
  const auto& shallow_runs = cartpole_backward_shallow();
  const auto deep_runs = run_group("c7_backward_baseline_h256x256x256", cartpole_config(Ordering::Backward, {256, 256, 256}));
  const double ms = median(solve_episodes(shallow_runs));
  const double md = median(solve_episodes(deep_runs));

  auto per_episode_ms = [](const std::vector<RunResult>& runs) {
    double ns = 0.0, episodes = 0.0, steps = 0.0;
    for (const auto& r : runs) {
      ns += static_cast<double>(r.total_wallclock_ns);
      episodes += static_cast<double>(r.stats.size());
      steps += static_cast<double>(r.total_timesteps);
    }
    return std::pair{ns / episodes / 1e6, ns / steps / 1e3};
  };
  const auto [shallow_ep, shallow_step] = per_episode_ms(shallow_runs);
  const auto [deep_ep, deep_step] = per_episode_ms(deep_runs);
  const bool ok = ms <= md && deep_ep > shallow_ep;
  return {ok, fmt::format("median episodes-to-solve [128,128] {} {} vs [256,256,256] {} {}; "
                          "per-episode wall-clock {:.3f} ms vs {:.3f} ms (per step {:.1f} us vs {:.1f} us)",
                          fmt_episodes(ms), list(solve_episodes(shallow_runs)), fmt_episodes(md),
                          list(solve_episodes(deep_runs)), shallow_ep, deep_ep, shallow_step, deep_step)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict criterion8() {
  const fs::path dir = output_root() / "c8_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<std::string> failures;

  TrainConfig c = TrainConfig::defaults_for(EnvKind::CartPole);
  c.variant = AlgorithmVariant::reinforce(Ordering::Backward, true);
  c.max_episodes = 40;
  c.stop_on_solve = false;
  c.record_wallclock = false;
  run_single(c, 11, {dir / "a.csv", dir / "a.bin"});
  run_single(c, 11, {dir / "b.csv", dir / "b.bin"});
  if (slurp(dir / "a.csv") != slurp(dir / "b.csv")) failures.push_back("repeat csv differs");
  if (slurp(dir / "a.bin") != slurp(dir / "b.bin")) failures.push_back("repeat checkpoint differs");

  TrainConfig m = c;
  m.max_episodes = 15;
  m.hidden_layers = {32, 32};
  m.seeds = {1, 2};
  MatrixAxes axes;
  axes.variants = {AlgorithmVariant::reinforce(Ordering::Forward), AlgorithmVariant::reinforce(Ordering::Backward, true)};
  axes.learning_rates = {1e-3, 1e-4};
  axes.depths = {{32, 32}, {32, 32, 32}};
  const auto serial = run_matrix(m, axes, {1, dir / "p1"});
  const auto parallel = run_matrix(m, axes, {4, dir / "p4"});
  std::size_t compared = 0;
  if (serial.size() != parallel.size()) failures.push_back("matrix sizes differ");
  for (std::size_t i = 0; i < std::min(serial.size(), parallel.size()); ++i) {
    if (!serial[i].csv_path || !parallel[i].csv_path || slurp(*serial[i].csv_path) != slurp(*parallel[i].csv_path))
      failures.push_back(fmt::format("matrix job {} differs", i));
    ++compared;
  }

  const std::string svg1 = emit_learning_curve(serial, dir / "s1.svg");
  const std::string svg2 = emit_learning_curve(parallel, dir / "s2.svg");
  if (svg1 != svg2 || slurp(dir / "s1.svg") != slurp(dir / "s2.svg")) failures.push_back("svg differs");

  std::string detail = fmt::format("repeat run csv+checkpoint, {} matrix jobs at parallelism 1 vs 4, svg", compared);
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Verdict()>>> criteria{
      {1, {"gradient fidelity", criterion1}},
      {2, {"return math", criterion2}},
      {3, {"order equivalence", criterion3}},
      {4, {"chain exact gradient", criterion4}},
      {5, {"cartpole backward+baseline", criterion5}},
      {6, {"landerlite normalization", criterion6}},
      {7, {"depth comparison", criterion7}},
      {8, {"determinism and logging", criterion8}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  if (selected.empty())
    for (const auto& [id, _] : criteria) selected.insert(id);

  bool all = true;
  for (int id : selected) {
    const auto it = criteria.find(id);
    if (it == criteria.end()) {
      fmt::print("criterion {}: FAIL unknown criterion\n", id);
      all = false;
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = it->second.second();
    } catch (const std::exception& e) {
      v = {false, fmt::format("exception: {}", e.what())};
    }
    fmt::print("criterion {} [{}]: {} {} ({:.1f}s)\n", id, it->second.first, v.passed ? "PASS" : "FAIL", v.detail,
               seconds_since(t0));
    std::fflush(stdout);
    all = all && v.passed;
  }
  return all ? 0 : 1;
}
