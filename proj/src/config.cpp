#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>

#include "revcurl/errors.hpp"
#include "revcurl/harness.hpp"

namespace revcurl {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    std::string item = trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!item.empty()) parts.push_back(std::move(item));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <typename T>
T parse_number(std::string_view text, std::string_view key) {
  const std::string t = trim(text);
  T value{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
    throw ConfigError(fmt::format("invalid value '{}' for {}", text, key));
  return value;
}

}  // namespace

bool parse_bool(std::string_view text) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "on" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "off" || t == "no" || t == "0") return false;
  throw ConfigError(fmt::format("invalid boolean '{}'", text));
}

std::vector<std::size_t> parse_size_list(std::string_view text, char sep) {
  const std::string t = trim(text);
  if (t.empty() || t == "none") return {};
  std::vector<std::size_t> out;
  for (const auto& item : split(t, sep)) out.push_back(parse_number<std::size_t>(item, "size list"));
  return out;
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number<std::uint64_t>(item, "seeds"));
  if (out.empty()) throw ConfigError("seed list is empty");
  return out;
}

std::vector<double> parse_real_list(std::string_view text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number<double>(item, "real list"));
  if (out.empty()) throw ConfigError("list of numbers is empty");
  return out;
}

MatrixAxes SweepAxesSpec::resolve(const TrainConfig& base) const {
  MatrixAxes axes;
  for (Ordering o : orderings) {
    for (bool b : baselines) {
      for (bool n : normalize) {
        AlgorithmVariant v = base.variant;
        v.ordering = o;
        v.baseline = b;
        v.normalize_returns = n;
        axes.variants.push_back(v);
      }
    }
  }
  axes.learning_rates = learning_rates.empty() ? std::vector<double>{base.learning_rate} : learning_rates;
  axes.depths = depths.empty() ? std::vector<std::vector<std::size_t>>{base.hidden_layers} : depths;
  return axes;
}

ConfigDocument parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("config parse error at line {}: {}", e.line(), e.message()));
  }

  ConfigDocument doc;
  EnvKind env = EnvKind::CartPole;
  if (auto name = tree.get_optional<std::string>("env.name")) env = parse_env_kind(trim(*name));
  doc.train = TrainConfig::defaults_for(env);
  TrainConfig& c = doc.train;

  using Setter = std::function<void(const std::string&)>;
  const std::map<std::string, std::map<std::string, Setter>> handlers{
      {"env", {{"name", [](const std::string&) {}}}},
      {"trainer",
       {
           {"ordering", [&](const std::string& v) { c.variant.ordering = parse_ordering(trim(v)); }},
           {"baseline", [&](const std::string& v) { c.variant.baseline = parse_bool(v); }},
           {"normalize", [&](const std::string& v) { c.variant.normalize_returns = parse_bool(v); }},
           {"discount_weighting", [&](const std::string& v) { c.variant.discount_weighting = parse_bool(v); }},
           {"update_mode",
            [&](const std::string& v) {
              const std::string t = trim(v);
              if (t == "per_step") c.variant.update_mode = UpdateMode::PerStep;
              else if (t == "batched") c.variant.update_mode = UpdateMode::BatchedPerEpisode;
              else throw ConfigError(fmt::format("unknown update_mode '{}'", t));
            }},
           {"gamma", [&](const std::string& v) { c.gamma = parse_number<double>(v, "gamma"); }},
           {"learning_rate", [&](const std::string& v) { c.learning_rate = parse_number<double>(v, "learning_rate"); }},
           {"optimizer",
            [&](const std::string& v) {
              const std::string t = trim(v);
              if (t == "adam") c.optimizer = OptimizerKind::Adam;
              else if (t == "sgd") c.optimizer = OptimizerKind::Sgd;
              else throw ConfigError(fmt::format("unknown optimizer '{}'", t));
            }},
       }},
      {"network",
       {
           {"hidden_layers", [&](const std::string& v) { c.hidden_layers = parse_size_list(v); }},
           {"activation",
            [&](const std::string& v) {
              const std::string t = trim(v);
              if (t == "tanh") c.activation = Activation::Tanh;
              else if (t == "relu") c.activation = Activation::Relu;
              else throw ConfigError(fmt::format("unknown activation '{}'", t));
            }},
       }},
      {"harness",
       {
           {"max_episodes", [&](const std::string& v) { c.max_episodes = parse_number<std::size_t>(v, "max_episodes"); }},
           {"seeds", [&](const std::string& v) { c.seeds = parse_seed_list(v); }},
           {"solved_threshold", [&](const std::string& v) { c.solved_threshold = parse_number<double>(v, "solved_threshold"); }},
           {"solved_window", [&](const std::string& v) { c.solved_window = parse_number<std::size_t>(v, "solved_window"); }},
           {"stop_on_solve", [&](const std::string& v) { c.stop_on_solve = parse_bool(v); }},
           {"record_wallclock", [&](const std::string& v) { c.record_wallclock = parse_bool(v); }},
           {"output_dir", [&](const std::string& v) { doc.harness.output_dir = trim(v); }},
           {"parallelism", [&](const std::string& v) { doc.harness.parallelism = parse_number<std::size_t>(v, "parallelism"); }},
       }},
      {"sweep",
       {
           {"orderings",
            [&](const std::string& v) {
              doc.sweep.orderings.clear();
              for (const auto& item : split(v, ',')) doc.sweep.orderings.push_back(parse_ordering(item));
            }},
           {"baselines",
            [&](const std::string& v) {
              doc.sweep.baselines.clear();
              for (const auto& item : split(v, ',')) doc.sweep.baselines.push_back(parse_bool(item));
            }},
           {"normalize",
            [&](const std::string& v) {
              doc.sweep.normalize.clear();
              for (const auto& item : split(v, ',')) doc.sweep.normalize.push_back(parse_bool(item));
            }},
           {"learning_rates",
            [&](const std::string& v) {
              doc.sweep.learning_rates = parse_real_list(v);
            }},
           {"depths",
            [&](const std::string& v) {
              doc.sweep.depths.clear();
              for (const auto& item : split(v, ',')) doc.sweep.depths.push_back(parse_size_list(item, 'x'));
            }},
       }},
  };

  for (const auto& [section, body] : tree) {
    const auto sec = handlers.find(section);
    if (sec == handlers.end())
      throw ConfigError(fmt::format("unknown config section '{}'", section));
    for (const auto& [key, value] : body) {
      const auto h = sec->second.find(key);
      if (h == sec->second.end()) throw ConfigError(fmt::format("unknown key '{}' in section [{}]", key, section));
      h->second(value.get_value<std::string>());
    }
  }
  c.validate();
  return doc;
}

ConfigDocument load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  return parse_config(in);
}

}  // namespace revcurl
