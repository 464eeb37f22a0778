// Command-line front end: train, sweep, plot, verify, constants.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "revcurl/environments.hpp"
#include "revcurl/errors.hpp"
#include "revcurl/harness.hpp"
#include "revcurl/verify.hpp"

namespace {

using namespace revcurl;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAllFaulted = 3;

std::string one_line(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\n' || c == '\r') out += ' ';
    else if (c == '"') out += "\\\"";
    else out += c;
  }
  return out;
}

void print_error(std::string_view code, std::string_view message) {
  std::cerr << "error code=" << code << " message=\"" << one_line(message) << "\"\n";
}

// Flags shared by `train` and `sweep`; every field is optional so that only
// flags actually given override the config file.
struct TrainFlags {
  std::optional<std::string> config_path;
  std::optional<std::string> env;
  std::optional<std::string> ordering;
  std::optional<bool> baseline;
  std::optional<bool> normalize;
  std::optional<std::string> update_mode;
  std::optional<bool> discount_weighting;
  std::optional<double> gamma;
  std::optional<double> lr;
  std::optional<std::string> hidden;
  std::optional<std::string> activation;
  std::optional<std::string> optimizer;
  std::optional<std::size_t> max_episodes;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> seeds;
  std::optional<double> solved_threshold;
  std::optional<std::size_t> solved_window;
  std::optional<bool> stop_on_solve;
  std::optional<bool> record_wallclock;
  std::optional<std::string> output_dir;
  std::optional<std::string> svg;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "Config file (key = value with [section] headers)");
    app.add_option("--env", env, "cartpole | landerlite | chain");
    app.add_option("--ordering", ordering, "forward | backward");
    app.add_flag("--baseline,!--no-baseline", baseline, "Subtract a learned value baseline");
    app.add_flag("--normalize,!--no-normalize", normalize, "Normalize returns per episode");
    app.add_option("--update-mode", update_mode, "per_step | batched");
    app.add_flag("--discount-weighting,!--no-discount-weighting", discount_weighting,
                 "Weight each step by gamma^t");
    app.add_option("--gamma", gamma, "Discount factor in [0, 1]");
    app.add_option("--lr", lr, "Learning rate");
    app.add_option("--hidden", hidden, "Hidden layer sizes, e.g. 128,128");
    app.add_option("--activation", activation, "tanh | relu");
    app.add_option("--optimizer", optimizer, "adam | sgd");
    app.add_option("--max-episodes", max_episodes, "Episode budget per run");
    app.add_option("--seed", seed, "Single master seed");
    app.add_option("--seeds", seeds, "Comma-separated master seeds");
    app.add_option("--solved-threshold", solved_threshold, "Moving-average score counted as solved");
    app.add_option("--solved-window", solved_window, "Moving-average window (episodes)");
    app.add_flag("--stop-on-solve,!--no-stop-on-solve", stop_on_solve, "Stop a run once solved");
    app.add_flag("--wallclock,!--no-wallclock", record_wallclock, "Record per-episode wall-clock");
    app.add_option("--output-dir", output_dir, "Directory for CSV logs and checkpoints");
    app.add_option("--svg", svg, "Write a learning-curve SVG here");
  }

  ConfigDocument resolve() const {
    std::optional<EnvKind> env_kind;
    if (env) env_kind = parse_env_kind(*env);
    ConfigDocument doc;
    if (config_path) {
      doc = load_config(*config_path);
      // An explicit --env takes precedence over the file's environment; the
      // file is re-read on top of that environment's defaults.
      if (env_kind && *env_kind != doc.train.env) {
        std::ostringstream patched;
        std::ifstream in(*config_path);
        patched << "[env]\nname = " << to_string(*env_kind) << "\n";
        std::string line;
        bool skip_env = false;
        while (std::getline(in, line)) {
          if (!line.empty() && line.front() == '[') skip_env = line.rfind("[env]", 0) == 0;
          if (!skip_env) patched << line << "\n";
        }
        std::istringstream again(patched.str());
        doc = parse_config(again);
      }
    } else {
      doc.train = TrainConfig::defaults_for(env_kind.value_or(EnvKind::CartPole));
    }
    TrainConfig& c = doc.train;

    if (const char* s = std::getenv("REVCURL_SEED"); s && *s) c.seeds = parse_seed_list(s);

    if (ordering) c.variant.ordering = parse_ordering(*ordering);
    if (baseline) c.variant.baseline = *baseline;
    if (normalize) c.variant.normalize_returns = *normalize;
    if (discount_weighting) c.variant.discount_weighting = *discount_weighting;
    if (update_mode) {
      if (*update_mode == "per_step") c.variant.update_mode = UpdateMode::PerStep;
      else if (*update_mode == "batched") c.variant.update_mode = UpdateMode::BatchedPerEpisode;
      else throw ConfigError("unknown update mode '" + *update_mode + "'");
    }
    if (gamma) c.gamma = *gamma;
    if (lr) c.learning_rate = *lr;
    if (hidden) c.hidden_layers = parse_size_list(*hidden);
    if (activation) {
      if (*activation == "tanh") c.activation = Activation::Tanh;
      else if (*activation == "relu") c.activation = Activation::Relu;
      else throw ConfigError("unknown activation '" + *activation + "'");
    }
    if (optimizer) {
      if (*optimizer == "adam") c.optimizer = OptimizerKind::Adam;
      else if (*optimizer == "sgd") c.optimizer = OptimizerKind::Sgd;
      else throw ConfigError("unknown optimizer '" + *optimizer + "'");
    }
    if (max_episodes) c.max_episodes = *max_episodes;
    if (seeds) c.seeds = parse_seed_list(*seeds);
    if (seed) c.seeds = {*seed};
    if (solved_threshold) c.solved_threshold = *solved_threshold;
    if (solved_window) c.solved_window = *solved_window;
    if (stop_on_solve) c.stop_on_solve = *stop_on_solve;
    if (record_wallclock) c.record_wallclock = *record_wallclock;
    if (output_dir) doc.harness.output_dir = *output_dir;
    if (!doc.harness.output_dir) doc.harness.output_dir = "runs";
    c.validate();
    return doc;
  }
};

void print_summary(const std::vector<RunResult>& results) {
  for (const auto& r : results) {
    const double final_avg = r.stats.empty() ? 0.0 : r.stats.back().moving_avg;
    std::cout << fmt::format(
        "run label={} seed={} episodes={} episodes_to_solve={} first_raw_hit={} final_moving_avg={:.6g} "
        "diverged={} fault=\"{}\" csv={}\n",
        r.config.label(), r.seed, r.stats.size(),
        r.episodes_to_solve ? std::to_string(*r.episodes_to_solve) : "unsolved",
        r.first_raw_hit ? std::to_string(*r.first_raw_hit) : "none", final_avg, r.diverged ? 1 : 0,
        one_line(r.fault), r.csv_path ? r.csv_path->string() : "-");
  }
}

int finish_runs(const std::vector<RunResult>& results) {
  print_summary(results);
  const bool all_faulted =
      !results.empty() && std::all_of(results.begin(), results.end(), [](const RunResult& r) { return r.faulted(); });
  if (all_faulted) {
    print_error("all_runs_faulted", fmt::format("all {} runs faulted", results.size()));
    return kExitAllFaulted;
  }
  return kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forward and backward-ordered REINFORCE training harness"};
  app.require_subcommand(1);

  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "Train one configuration (one run per seed)");
  train_flags.attach(*train);

  TrainFlags sweep_flags;
  std::optional<std::string> sweep_orderings, sweep_baselines, sweep_normalize, sweep_lrs, sweep_depths;
  std::optional<std::size_t> parallelism;
  auto* sweep = app.add_subcommand("sweep", "Run a grid of variants x learning rates x depths");
  sweep_flags.attach(*sweep);
  sweep->add_option("--orderings", sweep_orderings, "Ordering axis, e.g. forward,backward");
  sweep->add_option("--baselines", sweep_baselines, "Baseline axis, e.g. off,on");
  sweep->add_option("--normalize-axis", sweep_normalize, "Normalization axis, e.g. off,on");
  sweep->add_option("--lrs", sweep_lrs, "Learning-rate axis, e.g. 1e-3,1e-4,1e-5");
  sweep->add_option("--depths", sweep_depths, "Depth axis, e.g. 128x128,256x256x256");
  sweep->add_option("--parallelism", parallelism, "Concurrent runs");

  std::vector<std::string> plot_inputs;
  std::string plot_output = "learning_curve.svg";
  std::optional<double> plot_threshold;
  std::string plot_title = "Learning curve";
  auto* plot = app.add_subcommand("plot", "Render CSV logs as an SVG learning curve");
  plot->add_option("csv", plot_inputs, "CSV files")->required();
  plot->add_option("-o,--output", plot_output, "Output SVG path");
  plot->add_option("--threshold", plot_threshold, "Solved threshold rule");
  plot->add_option("--title", plot_title, "Chart title");

  VerifyOptions verify_options;
  auto* verify = app.add_subcommand("verify", "Run the gradient, return, ordering and chain oracle checks");
  verify->add_option("--seed", verify_options.seed, "Seed for the random configurations");
  verify->add_option("--chain-episodes", verify_options.chain_episodes, "Sampled episodes for the chain check");

  std::string constants_output = "environment_constants.txt";
  auto* constants = app.add_subcommand("constants", "Write the environment constants file");
  constants->add_option("-o,--output", constants_output, "Output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return kExitConfig;
  }

  try {
    if (*train) {
      const ConfigDocument doc = train_flags.resolve();
      const auto results = run_experiment(doc.train, doc.harness.output_dir);
      if (train_flags.svg) emit_learning_curve(results, std::filesystem::path(*train_flags.svg));
      return finish_runs(results);
    }
    if (*sweep) {
      ConfigDocument doc = sweep_flags.resolve();
      if (sweep_orderings) {
        doc.sweep.orderings.clear();
        for (const auto& s : split_list(*sweep_orderings)) doc.sweep.orderings.push_back(parse_ordering(s));
      }
      if (sweep_baselines) {
        doc.sweep.baselines.clear();
        for (const auto& s : split_list(*sweep_baselines)) doc.sweep.baselines.push_back(parse_bool(s));
      }
      if (sweep_normalize) {
        doc.sweep.normalize.clear();
        for (const auto& s : split_list(*sweep_normalize)) doc.sweep.normalize.push_back(parse_bool(s));
      }
      if (sweep_lrs) {
        doc.sweep.learning_rates = parse_real_list(*sweep_lrs);
      }
      if (sweep_depths) {
        doc.sweep.depths.clear();
        for (const auto& s : split_list(*sweep_depths)) doc.sweep.depths.push_back(parse_size_list(s, 'x'));
      }
      if (parallelism) doc.harness.parallelism = *parallelism;
      const MatrixAxes axes = doc.sweep.resolve(doc.train);
      const auto results = run_matrix(doc.train, axes, {doc.harness.parallelism, doc.harness.output_dir});
      const std::filesystem::path svg =
          sweep_flags.svg ? std::filesystem::path(*sweep_flags.svg) : *doc.harness.output_dir / "sweep.svg";
      emit_learning_curve(results, svg);
      std::cout << "svg=" << svg.string() << "\n";
      return finish_runs(results);
    }
    if (*plot) {
      std::vector<CurveSeries> series;
      for (const auto& path : plot_inputs) {
        CurveSeries s;
        s.label = std::filesystem::path(path).stem().string();
        for (const auto& row : read_csv(std::filesystem::path(path))) {
          s.episodes.push_back(static_cast<double>(row.episode));
          s.values.push_back(row.moving_avg);
        }
        series.push_back(std::move(s));
      }
      std::ofstream os(plot_output, std::ios::binary | std::ios::trunc);
      os << render_learning_curve(series, {plot_title, plot_threshold});
      if (!os) throw Error("cannot write " + plot_output);
      std::cout << "svg=" << plot_output << "\n";
      return kExitOk;
    }
    if (*verify) {
      bool all_passed = true;
      for (const auto& check : run_verification(verify_options)) {
        std::cout << fmt::format("[{}] {} ({:.2f}s): {}\n", check.passed ? "PASS" : "FAIL", check.name,
                                 check.seconds, check.detail);
        all_passed = all_passed && check.passed;
      }
      return all_passed ? kExitOk : kExitFailure;
    }
    if (*constants) {
      write_environment_constants(constants_output);
      std::cout << "constants=" << constants_output << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    print_error(e.code(), e.what());
    return kExitConfig;
  } catch (const Error& e) {
    print_error(e.code(), e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return kExitFailure;
  }
  return kExitOk;
}
