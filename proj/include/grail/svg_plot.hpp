#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "grail/core.hpp"

namespace grail::plot {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CsvTable parse_csv(const std::string& text, const std::string& what) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (t.header.empty()) {
      t.header = split_line(line);
      continue;
    }
    auto row = split_line(line);
    if (row.size() != t.header.size()) throw ConfigError(what + ": ragged row '" + line + "'");
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw ConfigError(what + " is empty");
  return t;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("missing CSV " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

inline double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": not a number '" + s + "'");
  }
}

struct Series {
  std::string label;
  std::vector<double> x, mean, lo, hi;
};

struct Panel {
  std::string title;
  std::string y_label;
  std::optional<double> y_max;  // fixed upper bound, otherwise from data
  std::vector<Series> series;
};

/// competence_agg.csv -> one series per goal, in order of first appearance.
inline Panel competence_panel(const std::string& csv_text, const std::string& title) {
  const auto t = parse_csv(csv_text, "competence CSV");
  const auto ix = t.column("trial_index"), ig = t.column("goal"), im = t.column("mean"), il = t.column("ci_low"),
             ih = t.column("ci_high");
  Panel p{title, "competence", 1.0, {}};
  std::map<std::string, std::size_t> slot;
  for (const auto& r : t.rows) {
    auto [it, fresh] = slot.try_emplace(r[ig], p.series.size());
    if (fresh) p.series.push_back({r[ig], {}, {}, {}, {}});
    Series& s = p.series[it->second];
    s.x.push_back(to_double(r[ix], "trial_index"));
    s.mean.push_back(to_double(r[im], "mean"));
    s.lo.push_back(to_double(r[il], "ci_low"));
    s.hi.push_back(to_double(r[ih], "ci_high"));
  }
  return p;
}

/// wasted_agg.csv -> one cumulative wasted-trials series.
inline Series wasted_series(const std::string& csv_text, const std::string& label) {
  const auto t = parse_csv(csv_text, "wasted CSV");
  const auto ix = t.column("interval_end"), im = t.column("mean"), il = t.column("ci_low"), ih = t.column("ci_high");
  Series s{label, {}, {}, {}, {}};
  for (const auto& r : t.rows) {
    s.x.push_back(to_double(r[ix], "interval_end"));
    s.mean.push_back(to_double(r[im], "mean"));
    s.lo.push_back(to_double(r[il], "ci_low"));
    s.hi.push_back(to_double(r[ih], "ci_high"));
  }
  return s;
}

namespace detail {

inline constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                     "#9467bd", "#8c564b", "#e377c2", "#17becf"};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
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

// Round up to 1, 2 or 5 times a power of ten.
inline double nice_ceiling(double v) {
  if (!(v > 0.0)) return 1.0;
  double p = 1.0;
  while (p * 10.0 <= v) p *= 10.0;
  while (p > v) p /= 10.0;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * p >= v) return m * p;
  return 10.0 * p;
}

struct Frame {
  double left, top, width, height;
  double x_max, y_max;

  double px(double x) const { return left + width * (x_max > 0 ? x / x_max : 0.0); }
  double py(double y) const { return top + height * (1.0 - std::clamp(y / y_max, 0.0, 1.0)); }
};

inline void draw_panel(std::ostream& os, const Panel& p, double left, double top, double width, double height) {
  double x_max = 0.0, y_top = 0.0;
  for (const auto& s : p.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x_max = std::max(x_max, s.x[i]);
      y_top = std::max({y_top, s.hi[i], s.mean[i]});
    }
  const Frame f{left + 50, top + 30, width - 70, height - 70, x_max, p.y_max.value_or(nice_ceiling(y_top))};

  os << "<g>\n";
  os << "<text x=\"" << num(left + width / 2) << "\" y=\"" << num(top + 18)
     << "\" text-anchor=\"middle\" font-size=\"14\">" << escape(p.title) << "</text>\n";
  os << "<rect x=\"" << num(f.left) << "\" y=\"" << num(f.top) << "\" width=\"" << num(f.width) << "\" height=\""
     << num(f.height) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double yv = f.y_max * k / 4.0, xv = f.x_max * k / 4.0;
    os << "<text x=\"" << num(f.left - 6) << "\" y=\"" << num(f.py(yv) + 4)
       << "\" text-anchor=\"end\" font-size=\"10\">" << num(yv) << "</text>\n";
    os << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(f.top + f.height + 14)
       << "\" text-anchor=\"middle\" font-size=\"10\">" << num(xv) << "</text>\n";
  }
  os << "<text x=\"" << num(f.left + f.width / 2) << "\" y=\"" << num(f.top + f.height + 30)
     << "\" text-anchor=\"middle\" font-size=\"11\">trials</text>\n";
  os << "<text x=\"" << num(left + 12) << "\" y=\"" << num(f.top + f.height / 2)
     << "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 " << num(left + 12) << ' '
     << num(f.top + f.height / 2) << ")\">" << escape(p.y_label) << "</text>\n";

  for (std::size_t si = 0; si < p.series.size(); ++si) {
    const Series& s = p.series[si];
    const char* colour = kPalette[si % kPalette.size()];
    os << "<polygon class=\"ci\" fill=\"" << colour << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << num(f.px(s.x[i])) << ',' << num(f.py(s.hi[i])) << ' ';
    for (std::size_t i = s.x.size(); i-- > 0;) os << num(f.px(s.x[i])) << ',' << num(f.py(s.lo[i])) << ' ';
    os << "\"/>\n";
    os << "<polyline class=\"series\" data-label=\"" << escape(s.label) << "\" fill=\"none\" stroke=\"" << colour
       << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << (i ? " " : "") << num(f.px(s.x[i])) << ',' << num(f.py(s.mean[i]));
    os << "\"/>\n";
    const double ly = f.top + 12 + 14.0 * static_cast<double>(si);
    os << "<line x1=\"" << num(f.left + f.width - 60) << "\" y1=\"" << num(ly - 4) << "\" x2=\""
       << num(f.left + f.width - 45) << "\" y2=\"" << num(ly - 4) << "\" stroke=\"" << colour
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << num(f.left + f.width - 40) << "\" y=\"" << num(ly) << "\" font-size=\"10\">"
       << escape(s.label) << "</text>\n";
  }
  os << "</g>\n";
}

}  // namespace detail

/// Competence panels side by side on top, one wasted-trials panel below.
inline std::string render_svg(const std::vector<Panel>& competence, const std::optional<Panel>& wasted) {
  constexpr double kW = 420, kH = 300;
  const double cols = static_cast<double>(std::max<std::size_t>(1, competence.size()));
  const double width = kW * cols;
  const double height = kH * (wasted ? 2.0 : 1.0);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << static_cast<int>(width) << "\" height=\"" << static_cast<int>(height)
     << "\" viewBox=\"0 0 " << static_cast<int>(width) << ' ' << static_cast<int>(height) << "\" font-family=\"sans-serif\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < competence.size(); ++i)
    detail::draw_panel(os, competence[i], kW * static_cast<double>(i), 0, kW, kH);
  if (wasted) detail::draw_panel(os, *wasted, 0, kH, std::min(width, 2 * kW), kH);
  os << "</svg>\n";
  return os.str();
}

}  // namespace grail::plot
