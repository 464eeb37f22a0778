#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "revcurl/environments.hpp"
#include "revcurl/nn.hpp"
#include "revcurl/trainer.hpp"

namespace revcurl {

struct TrainConfig {
  EnvKind env = EnvKind::CartPole;
  AlgorithmVariant variant;
  double gamma = 0.99;
  double learning_rate = 1e-4;
  std::vector<std::size_t> hidden_layers{128, 128};
  Activation activation = Activation::Tanh;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::size_t max_episodes = 3000;
  std::vector<std::uint64_t> seeds{0};
  double solved_threshold = cartpole::kSolvedScore;
  std::size_t solved_window = 100;
  bool stop_on_solve = true;
  // When false every wallclock_ms entry is written as 0, making the CSV a
  // pure function of (config, seed).
  bool record_wallclock = true;

  // Defaults (learning rate, solved threshold) for one environment.
  static TrainConfig defaults_for(EnvKind env);

  // e.g. "cartpole_backward+baseline_lr0.0001_h128x128"
  std::string label() const;
  // Throws ConfigError describing the first invalid field.
  void validate() const;
};

struct EpisodeStats {
  std::size_t episode = 0;  // 1-based
  double total_reward = 0.0;
  std::size_t length = 0;
  double moving_avg = 0.0;
  std::int64_t wallclock_ms = 0;
  bool diverged = false;

  friend bool operator==(const EpisodeStats&, const EpisodeStats&) = default;
};

struct RunResult {
  TrainConfig config;
  std::uint64_t seed = 0;
  std::vector<EpisodeStats> stats;
  std::optional<std::size_t> episodes_to_solve;  // first episode with moving_avg >= threshold
  std::optional<std::size_t> first_raw_hit;      // first episode with total_reward >= threshold
  bool diverged = false;
  std::string fault;  // empty unless the run ended on an error
  std::optional<std::filesystem::path> csv_path;
  std::optional<std::filesystem::path> checkpoint_path;
  std::int64_t total_wallclock_ns = 0;
  std::uint64_t total_timesteps = 0;

  bool faulted() const { return diverged || !fault.empty(); }
  // Mean wall-clock per episode in milliseconds (sub-millisecond resolution).
  double mean_episode_wallclock_ms() const;
};

// Where a single run writes its artefacts; nothing is written when unset.
struct RunOutputs {
  std::optional<std::filesystem::path> csv_path;
  std::optional<std::filesystem::path> checkpoint_path;
};

// CSV: header `episode,total_reward,length,moving_avg,wallclock_ms,diverged`,
// reals with 17 significant digits, LF line endings.
inline constexpr const char* kCsvHeader = "episode,total_reward,length,moving_avg,wallclock_ms,diverged";
std::string format_csv_row(const EpisodeStats& s);
EpisodeStats parse_csv_row(const std::string& line);
std::vector<EpisodeStats> read_csv(const std::filesystem::path& path);
std::vector<EpisodeStats> read_csv(std::istream& in);

std::optional<std::size_t> episodes_to_solve(const std::vector<EpisodeStats>& stats, double threshold);

// Trains one seed. Divergence and numerical faults end the run and are
// recorded in the result rather than thrown.
RunResult run_single(const TrainConfig& config, std::uint64_t seed, const RunOutputs& outputs = {});

// One run per configured seed, writing `<label>_seed<k>.csv` into
// `output_dir` when given.
std::vector<RunResult> run_experiment(const TrainConfig& config,
                                      const std::optional<std::filesystem::path>& output_dir = std::nullopt);

struct MatrixAxes {
  std::vector<AlgorithmVariant> variants;
  std::vector<double> learning_rates;
  std::vector<std::vector<std::size_t>> depths;  // hidden layer lists
};

struct MatrixOptions {
  std::size_t parallelism = 1;
  std::optional<std::filesystem::path> output_dir;
};

// Cartesian product variants x learning rates x depths, one run per seed.
// Results are ordered by (cell index, seed index) whatever the parallelism.
std::vector<TrainConfig> expand_matrix(const TrainConfig& base, const MatrixAxes& axes);
std::vector<RunResult> run_matrix(const TrainConfig& base, const MatrixAxes& axes,
                                  const MatrixOptions& options = {});

// ---------------------------------------------------------------------------
// Learning curves

struct CurveSeries {
  std::string label;
  std::vector<double> episodes;
  std::vector<double> values;
  bool is_mean = false;
};

struct CurveOptions {
  std::string title = "Learning curve";
  std::optional<double> threshold;
};

// Self-contained SVG line chart: one polyline per series, a legend, and a
// dashed horizontal rule at the threshold. Throws PreconditionError when
// `series` is empty.
std::string render_learning_curve(const std::vector<CurveSeries>& series, const CurveOptions& options);

// Per-run moving-average curves plus a mean curve for every configuration
// with more than one seed.
std::vector<CurveSeries> curves_from_results(const std::vector<RunResult>& results);

std::string emit_learning_curve(const std::vector<RunResult>& results,
                                const std::optional<std::filesystem::path>& output_path);

// ---------------------------------------------------------------------------
// Config files: `key = value` lines under `[section]` headers.
//
//   [env]      name
//   [trainer]  ordering, baseline, normalize, update_mode, discount_weighting,
//              gamma, learning_rate, optimizer
//   [network]  hidden_layers, activation
//   [harness]  max_episodes, seeds, solved_threshold, solved_window,
//              stop_on_solve, record_wallclock, output_dir, parallelism
//   [sweep]    orderings, baselines, normalize, learning_rates, depths

struct HarnessSettings {
  std::optional<std::filesystem::path> output_dir;
  std::size_t parallelism = 1;
};

struct SweepAxesSpec {
  std::vector<Ordering> orderings{Ordering::Forward, Ordering::Backward};
  std::vector<bool> baselines{false, true};
  std::vector<bool> normalize{false};
  std::vector<double> learning_rates;
  std::vector<std::vector<std::size_t>> depths;

  MatrixAxes resolve(const TrainConfig& base) const;
};

struct ConfigDocument {
  TrainConfig train;
  HarnessSettings harness;
  SweepAxesSpec sweep;
};

// Parses a config file on top of the environment's defaults. The `[env]`
// section picks the environment whose defaults are used; explicit keys then
// override them.
ConfigDocument load_config(const std::filesystem::path& path);
ConfigDocument parse_config(std::istream& in);

std::vector<std::size_t> parse_size_list(std::string_view text, char sep = ',');
std::vector<std::uint64_t> parse_seed_list(std::string_view text);
std::vector<double> parse_real_list(std::string_view text);
bool parse_bool(std::string_view text);

}  // namespace revcurl
