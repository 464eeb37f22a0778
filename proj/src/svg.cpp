#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "revcurl/errors.hpp"
#include "revcurl/harness.hpp"

namespace revcurl {

namespace {

constexpr double kWidth = 960.0;
constexpr double kHeight = 540.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 280.0;  // legend column
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_learning_curve(const std::vector<CurveSeries>& series, const CurveOptions& options) {
  if (series.empty()) throw PreconditionError("learning curve needs at least one series");

  double x_max = 1.0;
  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -std::numeric_limits<double>::infinity();
  for (const auto& s : series) {
    for (double x : s.episodes) x_max = std::max(x_max, x);
    for (double y : s.values) {
      y_min = std::min(y_min, y);
      y_max = std::max(y_max, y);
    }
  }
  if (options.threshold) {
    y_min = std::min(y_min, *options.threshold);
    y_max = std::max(y_max, *options.threshold);
  }
  if (!std::isfinite(y_min)) y_min = 0.0, y_max = 1.0;
  if (y_max - y_min < 1e-9) y_min -= 1.0, y_max += 1.0;
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + plot_w * x / x_max; };
  auto py = [&](double y) { return kTop + plot_h * (1.0 - (y - y_min) / (y_max - y_min)); };

  std::string svg;
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" viewBox=\"0 0 {0:.0f} "
      "{1:.0f}\" font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight);
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"#ffffff\"/>\n", kWidth, kHeight);
  svg += fmt::format("<text x=\"{:.2f}\" y=\"24\" font-size=\"16\">{}</text>\n", kLeft, xml_escape(options.title));

  // Axes and ticks.
  svg += fmt::format("<g class=\"axes\" stroke=\"#333333\" fill=\"none\">\n");
  svg += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\"/>\n", kLeft, kTop, kTop + plot_h);
  svg += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\"/>\n", kLeft, kTop + plot_h,
                     kLeft + plot_w);
  svg += "</g>\n<g class=\"ticks\" fill=\"#333333\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x_max * i / 5.0;
    const double yv = y_min + (y_max - y_min) * i / 5.0;
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:.0f}</text>\n", px(xv),
                       kTop + plot_h + 18.0, xv);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.1f}</text>\n", kLeft - 6.0,
                       py(yv) + 4.0, yv);
  }
  svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">episode</text>\n", kLeft + plot_w / 2.0,
                     kHeight - 10.0);
  svg += "</g>\n";

  if (options.threshold) {
    svg += fmt::format(
        "<line class=\"threshold\" x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#000000\" "
        "stroke-dasharray=\"6,4\"/>\n",
        kLeft, py(*options.threshold), kLeft + plot_w, py(*options.threshold));
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">solved {:g}</text>\n", kLeft + plot_w,
                       py(*options.threshold) - 4.0, *options.threshold);
  }

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % kPalette.size()];
    std::string points;
    const std::size_t n = std::min(s.episodes.size(), s.values.size());
    for (std::size_t k = 0; k < n; ++k) {
      if (k) points += ' ';
      points += fmt::format("{:.2f},{:.2f}", px(s.episodes[k]), py(s.values[k]));
    }
    svg += fmt::format(
        "<polyline class=\"{}\" data-label=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\" points=\"{}\"/>\n",
        s.is_mean ? "mean" : "run", xml_escape(s.label), color, s.is_mean ? "2.5" : "1.2", points);
  }

  svg += "<g class=\"legend\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = kTop + 16.0 * static_cast<double>(i);
    svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"12\" height=\"4\" fill=\"{}\"/>\n",
                       kWidth - kRight + 12.0, y + 4.0, kPalette[i % kPalette.size()]);
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", kWidth - kRight + 30.0, y + 10.0,
                       xml_escape(series[i].label));
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

std::vector<CurveSeries> curves_from_results(const std::vector<RunResult>& results) {
  std::vector<CurveSeries> out;
  std::map<std::string, std::vector<const RunResult*>> groups;
  std::vector<std::string> group_order;
  for (const auto& r : results) {
    CurveSeries s;
    s.label = fmt::format("{} seed={}", r.config.label(), r.seed);
    for (const auto& st : r.stats) {
      s.episodes.push_back(static_cast<double>(st.episode));
      s.values.push_back(st.moving_avg);
    }
    out.push_back(std::move(s));
    const std::string key = r.config.label();
    if (!groups.contains(key)) group_order.push_back(key);
    groups[key].push_back(&r);
  }
  // Mean over the runs still active at each episode.
  for (const auto& key : group_order) {
    const auto& members = groups[key];
    if (members.size() < 2) continue;
    std::size_t longest = 0;
    for (const auto* r : members) longest = std::max(longest, r->stats.size());
    CurveSeries mean;
    mean.label = key + " mean";
    mean.is_mean = true;
    for (std::size_t k = 0; k < longest; ++k) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto* r : members) {
        if (k < r->stats.size()) {
          sum += r->stats[k].moving_avg;
          ++count;
        }
      }
      mean.episodes.push_back(static_cast<double>(k + 1));
      mean.values.push_back(sum / static_cast<double>(count));
    }
    out.push_back(std::move(mean));
  }
  return out;
}

std::string emit_learning_curve(const std::vector<RunResult>& results,
                                const std::optional<std::filesystem::path>& output_path) {
  if (results.empty()) throw PreconditionError("no run results to plot");
  CurveOptions options;
  options.title = fmt::format("{} moving average ({} episodes)", to_string(results.front().config.env),
                              results.front().config.solved_window);
  options.threshold = results.front().config.solved_threshold;
  const std::string svg = render_learning_curve(curves_from_results(results), options);
  if (output_path) {
    std::ofstream os(*output_path, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write SVG: " + output_path->string());
    os << svg;
  }
  return svg;
}

}  // namespace revcurl
