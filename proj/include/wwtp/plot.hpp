#pragma once

// Line charts written as standalone SVG, rendered from the CSV outputs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "wwtp/csv.hpp"
#include "wwtp/errors.hpp"

namespace wwtp {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;  // NaN breaks the line
  std::string color = "#1f77b4";
};

struct HLine {
  double y = 0.0;
  std::string label;
  std::string color = "#d62728";
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<HLine> hlines;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline void render_panel(std::ostringstream& os, const Panel& p, double top, double width, double height) {
  const double left = 70, right = 160, pad_top = 30, pad_bottom = 45;
  const double w = width - left - right, h = height - pad_top - pad_bottom;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : p.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i]) || !std::isfinite(s.x[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  for (const auto& l : p.hlines) {
    y0 = std::min(y0, l.y);
    y1 = std::max(y1, l.y);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double margin = 0.05 * (y1 - y0);
  y0 -= margin;
  y1 += margin;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * w; };
  auto sy = [&](double y) { return top + pad_top + (1.0 - (y - y0) / (y1 - y0)) * h; };

  os << "<text x='" << left + w / 2 << "' y='" << top + 18 << "' text-anchor='middle' font-size='14'>"
     << escape(p.title) << "</text>\n";
  os << "<rect x='" << left << "' y='" << top + pad_top << "' width='" << w << "' height='" << h
     << "' fill='none' stroke='#333'/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = y0 + (y1 - y0) * k / 4.0, xv = x0 + (x1 - x0) * k / 4.0;
    os << "<line x1='" << left << "' x2='" << left + w << "' y1='" << sy(yv) << "' y2='" << sy(yv)
       << "' stroke='#ddd'/>\n";
    os << "<text x='" << left - 6 << "' y='" << sy(yv) + 4 << "' text-anchor='end' font-size='11'>" << num(yv)
       << "</text>\n";
    os << "<text x='" << sx(xv) << "' y='" << top + pad_top + h + 16 << "' text-anchor='middle' font-size='11'>"
       << num(xv) << "</text>\n";
  }
  os << "<text x='" << left + w / 2 << "' y='" << top + height - 8 << "' text-anchor='middle' font-size='12'>"
     << escape(p.x_label) << "</text>\n";
  os << "<text transform='translate(16," << top + pad_top + h / 2 << ") rotate(-90)' text-anchor='middle' "
     << "font-size='12'>" << escape(p.y_label) << "</text>\n";
  for (const auto& l : p.hlines) {
    os << "<line x1='" << left << "' x2='" << left + w << "' y1='" << sy(l.y) << "' y2='" << sy(l.y)
       << "' stroke='" << l.color << "' stroke-dasharray='6,4'/>\n";
    os << "<text x='" << left + w + 6 << "' y='" << sy(l.y) + 4 << "' font-size='11' fill='" << l.color << "'>"
       << escape(l.label) << "</text>\n";
  }
  double legend_y = top + pad_top + 12;
  for (const auto& s : p.series) {
    std::string path;
    bool pen = false;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) {
        pen = false;
        continue;
      }
      path += (pen ? " L" : " M") + num(sx(s.x[i])) + "," + num(sy(s.y[i]));
      pen = true;
    }
    if (!path.empty())
      os << "<path d='" << path << "' fill='none' stroke='" << s.color << "' stroke-width='1.3'/>\n";
    os << "<line x1='" << left + w + 8 << "' x2='" << left + w + 28 << "' y1='" << legend_y << "' y2='" << legend_y
       << "' stroke='" << s.color << "' stroke-width='2'/>\n";
    os << "<text x='" << left + w + 32 << "' y='" << legend_y + 4 << "' font-size='11'>" << escape(s.name)
       << "</text>\n";
    legend_y += 16;
  }
}

}  // namespace detail

inline std::string render_svg(const std::vector<Panel>& panels, double width = 900, double panel_height = 300) {
  std::ostringstream os;
  const double height = panel_height * static_cast<double>(panels.size());
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
     << "' font-family='sans-serif'>\n<rect width='100%' height='100%' fill='white'/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i)
    detail::render_panel(os, panels[i], panel_height * static_cast<double>(i), width, panel_height);
  os << "</svg>\n";
  return os.str();
}

inline void write_svg(const std::vector<Panel>& panels, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << render_svg(panels);
}

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> p{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  return p;
}

// Average reward per step against training steps, one line per setup.
inline std::vector<Panel> training_curve_panels(const CsvTable& log, const std::string& title) {
  Panel p{title, "environment steps", "episodic average reward per step", {}, {}};
  const auto x = log.numbers("step");
  const char* cols[] = {"reward_E1", "reward_E2", "reward_E3", "reward_E4", "reward_mean"};
  for (std::size_t i = 0; i < 5; ++i) p.series.push_back({cols[i], x, log.numbers(cols[i]), palette()[i]});
  Panel loss{"critic and actor losses", "environment steps", "loss", {}, {}};
  loss.series.push_back({"critic1", x, log.numbers("critic1_loss"), palette()[0]});
  loss.series.push_back({"critic2", x, log.numbers("critic2_loss"), palette()[1]});
  loss.series.push_back({"actor", x, log.numbers("actor_loss"), palette()[2]});
  return {p, loss};
}

// Effluent phosphate with the target limit, then the two doses.
inline std::vector<Panel> trace_panels(const CsvTable& trace, const std::string& title, double x_ideal) {
  const auto x = trace.numbers("step");
  Panel cp{title, "step", "phosphate (mg/L)", {{"c_p", x, trace.numbers("c_p"), palette()[0]}}, {{x_ideal, "limit"}}};
  Panel dose{"doses", "step", "flow (L/h)", {}, {}};
  dose.series.push_back({"q_jsf", x, trace.numbers("q_jsf"), palette()[1]});
  dose.series.push_back({"q_pax", x, trace.numbers("q_pax"), palette()[2]});
  return {cp, dose};
}

// Renders every training log and trace found under dir; returns the files written.
inline std::vector<std::string> plot_directory(const std::string& dir, double x_ideal) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw UsageError("plot: '" + dir + "' is not a directory");
  std::vector<fs::path> inputs;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") inputs.push_back(e.path());
  std::sort(inputs.begin(), inputs.end());
  std::vector<std::string> written;
  for (const auto& path : inputs) {
    const std::string stem = path.stem().string();
    fs::path out = path;
    out.replace_extension(".svg");
    if (stem == "train_log") {
      write_svg(training_curve_panels(read_csv(path.string()), path.parent_path().filename().string()), out.string());
    } else if (stem.rfind("trace_", 0) == 0) {
      write_svg(trace_panels(read_csv(path.string()), stem.substr(6), x_ideal), out.string());
    } else {
      continue;
    }
    written.push_back(out.string());
  }
  return written;
}

}  // namespace wwtp
