#include "revcurl/harness.hpp"

#include <fmt/format.h>

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <thread>

#include "revcurl/errors.hpp"
#include "revcurl/rng.hpp"

namespace revcurl {

TrainConfig TrainConfig::defaults_for(EnvKind env) {
  TrainConfig c;
  c.env = env;
  switch (env) {
    case EnvKind::CartPole:
      c.learning_rate = 1e-4;
      c.solved_threshold = cartpole::kSolvedScore;
      break;
    case EnvKind::LanderLite:
      c.learning_rate = 1e-4;
      c.solved_threshold = landerlite::kSolvedScore;
      break;
    case EnvKind::Chain:
      c.learning_rate = 1e-2;
      c.solved_threshold = 0.9;
      break;
  }
  return c;
}

std::string TrainConfig::label() const {
  std::string hidden;
  for (std::size_t i = 0; i < hidden_layers.size(); ++i) hidden += fmt::format("{}{}", i ? "x" : "", hidden_layers[i]);
  if (hidden.empty()) hidden = "linear";
  return fmt::format("{}_{}_lr{:g}_h{}", to_string(env), variant.label(), learning_rate, hidden);
}

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError(fmt::format("gamma {} outside [0, 1]", gamma));
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError(fmt::format("learning rate must be positive, got {}", learning_rate));
  for (std::size_t h : hidden_layers) {
    if (h == 0) throw ConfigError("hidden layer sizes must be positive");
  }
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (solved_window == 0) throw ConfigError("solved window must be positive");
  if (!std::isfinite(solved_threshold)) throw ConfigError("solved threshold must be finite");
}

double RunResult::mean_episode_wallclock_ms() const {
  if (stats.empty()) return 0.0;
  return static_cast<double>(total_wallclock_ns) / 1e6 / static_cast<double>(stats.size());
}

// ---------------------------------------------------------------------------
// CSV

std::string format_csv_row(const EpisodeStats& s) {
  return fmt::format("{},{:.17g},{},{:.17g},{},{}", s.episode, s.total_reward, s.length, s.moving_avg,
                     s.wallclock_ms, s.diverged ? 1 : 0);
}

namespace {

template <typename T>
T parse_field(std::string_view field, std::string_view name) {
  T value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError(fmt::format("bad CSV field {} = '{}'", name, field));
  return value;
}

}  // namespace

EpisodeStats parse_csv_row(const std::string& line) {
  std::vector<std::string_view> fields;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    fields.push_back(rest.substr(0, comma));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  if (fields.size() != 6) throw ConfigError(fmt::format("CSV row has {} fields, expected 6", fields.size()));
  EpisodeStats s;
  s.episode = parse_field<std::size_t>(fields[0], "episode");
  s.total_reward = parse_field<double>(fields[1], "total_reward");
  s.length = parse_field<std::size_t>(fields[2], "length");
  s.moving_avg = parse_field<double>(fields[3], "moving_avg");
  s.wallclock_ms = parse_field<std::int64_t>(fields[4], "wallclock_ms");
  const int diverged = parse_field<int>(fields[5], "diverged");
  if (diverged != 0 && diverged != 1) throw ConfigError("diverged column must be 0 or 1");
  s.diverged = diverged == 1;
  return s;
}

std::vector<EpisodeStats> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ConfigError("CSV header mismatch");
  std::vector<EpisodeStats> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_csv_row(line));
  }
  return rows;
}

std::vector<EpisodeStats> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV: " + path.string());
  return read_csv(in);
}

std::optional<std::size_t> episodes_to_solve(const std::vector<EpisodeStats>& stats, double threshold) {
  for (const auto& s : stats) {
    if (s.moving_avg >= threshold) return s.episode;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Runs

RunResult run_single(const TrainConfig& config, std::uint64_t seed, const RunOutputs& outputs) {
  config.validate();
  RunResult result;
  result.config = config;
  result.seed = seed;
  result.csv_path = outputs.csv_path;

  std::ofstream csv;
  if (outputs.csv_path) {
    csv.open(*outputs.csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) throw ConfigError("cannot open CSV for writing: " + outputs.csv_path->string());
    csv << kCsvHeader << '\n' << std::flush;
  }

  auto env = make_environment(config.env);
  const NetworkSpec spec{env->observation_dim(), env->action_count(), config.hidden_layers, config.activation};
  TrainState state = make_train_state(spec, config.variant.baseline, config.optimizer, config.learning_rate, seed);
  Rng env_rng(derive_seed(seed, StreamPurpose::Environment));
  Rng action_rng(derive_seed(seed, StreamPurpose::ActionSampling));

  std::vector<double> totals;
  totals.reserve(config.max_episodes);
  for (std::size_t episode = 1; episode <= config.max_episodes; ++episode) {
    const auto started = std::chrono::steady_clock::now();
    EpisodeStats row;
    row.episode = episode;
    bool stop = false;
    try {
      const NetworkPolicy policy(state.policy);
      const Trajectory traj = collect_episode(*env, policy, env_rng.next_u64(), action_rng);
      row.total_reward = traj.total_reward();
      row.length = traj.size();
      train_episode(state, traj, config.variant, config.gamma);
    } catch (const DivergenceFault& e) {
      row.diverged = true;
      result.fault = e.what();
    } catch (const NumericalFault& e) {
      row.diverged = true;
      result.fault = e.what();
    } catch (const Error& e) {
      result.fault = e.what();
      break;
    }
    const auto elapsed_ns =
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - started).count();
    result.total_wallclock_ns += elapsed_ns;
    result.total_timesteps += row.length;
    if (config.record_wallclock) row.wallclock_ms = elapsed_ns / 1'000'000;

    totals.push_back(row.total_reward);
    const std::size_t n = std::min(totals.size(), config.solved_window);
    double sum = 0.0;
    for (std::size_t i = totals.size() - n; i < totals.size(); ++i) sum += totals[i];
    row.moving_avg = sum / static_cast<double>(n);

    if (row.diverged) {
      result.diverged = true;
      stop = true;
    }
    if (!result.episodes_to_solve && !row.diverged && row.moving_avg >= config.solved_threshold) {
      result.episodes_to_solve = episode;
      if (config.stop_on_solve) stop = true;
    }
    if (!result.first_raw_hit && row.total_reward >= config.solved_threshold) result.first_raw_hit = episode;

    if (csv.is_open()) csv << format_csv_row(row) << '\n' << std::flush;
    result.stats.push_back(row);
    if (stop) break;
  }

  if (outputs.checkpoint_path) {
    const std::map<std::string, std::string> meta{
        {"env", std::string(to_string(config.env))},
        {"variant", config.variant.label()},
        {"seed", std::to_string(seed)},
        {"learning_rate", fmt::format("{:g}", config.learning_rate)},
        {"episodes", std::to_string(result.stats.size())},
    };
    save_checkpoint(state.policy, *outputs.checkpoint_path, meta);
    if (state.value) save_checkpoint(*state.value, outputs.checkpoint_path->string() + ".value", meta);
    result.checkpoint_path = outputs.checkpoint_path;
  }
  return result;
}

namespace {

RunOutputs outputs_for(const std::optional<std::filesystem::path>& dir, const std::string& stem) {
  RunOutputs out;
  if (dir) {
    std::filesystem::create_directories(*dir);
    out.csv_path = *dir / (stem + ".csv");
    out.checkpoint_path = *dir / (stem + ".params");
  }
  return out;
}

}  // namespace

std::vector<RunResult> run_experiment(const TrainConfig& config,
                                      const std::optional<std::filesystem::path>& output_dir) {
  config.validate();
  std::vector<RunResult> results;
  for (std::uint64_t seed : config.seeds) {
    results.push_back(
        run_single(config, seed, outputs_for(output_dir, fmt::format("{}_seed{}", config.label(), seed))));
  }
  return results;
}

std::vector<TrainConfig> expand_matrix(const TrainConfig& base, const MatrixAxes& axes) {
  if (axes.variants.empty() || axes.learning_rates.empty() || axes.depths.empty())
    throw ConfigError("every sweep axis needs at least one value");
  std::vector<TrainConfig> cells;
  for (const auto& variant : axes.variants) {
    for (double lr : axes.learning_rates) {
      for (const auto& depth : axes.depths) {
        TrainConfig c = base;
        c.variant = variant;
        c.learning_rate = lr;
        c.hidden_layers = depth;
        c.validate();
        cells.push_back(std::move(c));
      }
    }
  }
  return cells;
}

std::vector<RunResult> run_matrix(const TrainConfig& base, const MatrixAxes& axes, const MatrixOptions& options) {
  const std::vector<TrainConfig> cells = expand_matrix(base, axes);
  struct Job {
    std::size_t cell;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (std::uint64_t seed : cells[c].seeds) jobs.push_back({c, seed});

  std::vector<RunResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      const TrainConfig& cfg = cells[job.cell];
      const std::string stem = fmt::format("c{:02}_{}_seed{}", job.cell, cfg.label(), job.seed);
      try {
        results[i] = run_single(cfg, job.seed, outputs_for(options.output_dir, stem));
      } catch (const std::exception& e) {
        results[i].config = cfg;
        results[i].seed = job.seed;
        results[i].fault = e.what();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(options.parallelism, jobs.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return results;
}

}  // namespace revcurl
