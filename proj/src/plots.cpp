#include "safecor/harness.hpp"
#include "safecor/text_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace safecor {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

constexpr std::array<const char*, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12) {
      const double pad = std::max(std::abs(hi) * 0.1, 1e-3);
      lo -= pad;
      hi += pad;
    }
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

std::string render_chart(const std::string& title, const std::string& y_label, const std::vector<Series>& series,
                         const std::optional<double>& threshold) {
  Range xr, yr;
  xr.add(0.0);
  for (const auto& s : series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  if (threshold) {
    yr.add(*threshold);
    yr.add(0.0);
  }
  xr.finish();
  yr.finish();
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
      << title << "</text>\n";
  // axes
  out << "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + ph << "\" x2=\"" << kLeft + pw << "\" y2=\"" << kTop + ph << "\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kTop + ph << "\"/>\n";
  out << "</g>\n";
  out << "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << kTop + ph + 16 << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
  }
  out << "</g>\n";
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">environment steps</text>\n";
  out << "<text x=\"16\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
      << "transform=\"rotate(-90 16 " << kTop + ph / 2 << ")\">" << y_label << "</text>\n";

  if (threshold) {
    out << "<line class=\"threshold\" data-threshold=\"" << format_double(*threshold) << "\" x1=\"" << kLeft << "\" y1=\""
        << py(*threshold) << "\" x2=\"" << kLeft + pw << "\" y2=\"" << py(*threshold)
        << "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
  }

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % kPalette.size()];
    out << "<polyline class=\"series\" data-name=\"" << s.name << "\" data-points=\"" << s.x.size()
        << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) out << (k ? " " : "") << px(s.x[k]) << ',' << py(s.y[k]);
    out << "\"/>\n";
    const double ly = kTop + 14.0 + 18.0 * static_cast<double>(i);
    out << "<line x1=\"" << kLeft + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << kLeft + pw + 32 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace

std::vector<std::filesystem::path> emit_plots(const std::vector<std::pair<std::string, std::filesystem::path>>& inputs,
                                              double threshold_d, const std::filesystem::path& out_dir) {
  std::vector<std::vector<BatchMetrics>> logs;
  for (const auto& [name, path] : inputs) logs.push_back(read_metrics_csv(path));

  auto make = [&](auto field) {
    std::vector<Series> out;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Series s{inputs[i].first, {}, {}};
      for (const auto& row : logs[i]) {
        s.x.push_back(static_cast<double>(row.steps));
        s.y.push_back(field(row));
      }
      out.push_back(std::move(s));
    }
    return out;
  };

  const std::vector<std::filesystem::path> paths = {out_dir / "reward_return.svg", out_dir / "cost_rate.svg",
                                                    out_dir / "total_cv.svg"};
  write_text_file(paths[0], render_chart("Reward return per episode", "reward return",
                                         make([](const BatchMetrics& r) { return r.avg_reward_return; }), std::nullopt));
  write_text_file(paths[1], render_chart("Cost rate (average cost per step)", "cost rate",
                                         make([](const BatchMetrics& r) { return r.cost_rate; }), threshold_d));
  write_text_file(paths[2], render_chart("Total constraint violations", "total CV",
                                         make([](const BatchMetrics& r) { return static_cast<double>(r.total_cv); }),
                                         std::nullopt));
  return paths;
}

}  // namespace safecor
