#include "mtil/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace mtil {

using nlohmann::json;

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double record_field(const ExperimentRecord& r, const std::string& field) {
  if (field == "n") return r.n;
  if (field == "t") return r.t;
  if (field == "m") return r.m;
  if (field == "normalized_return") return r.normalized_return;
  if (field == "raw_return") return r.raw_return;
  if (field == "value_gap_inf") return r.value_gap_inf;
  throw std::invalid_argument("plot: unknown field '" + field + "'");
}

struct Stats {
  double mean = 0.0;
  double std_error = 0.0;
  int count = 0;
};

Stats stats_of(const std::vector<double>& values) {
  Stats s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / s.count;
  if (s.count > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std_error = std::sqrt(sq / (s.count - 1)) / std::sqrt(double(s.count));
  }
  return s;
}

}  // namespace

void PlotSpec::validate() const {
  const auto axis_ok = [](const std::string& f) { return f == "n" || f == "t" || f == "m"; };
  if (!axis_ok(x_field)) throw std::invalid_argument("plot spec: x_field must be n, t or m");
  if (!axis_ok(series_field))
    throw std::invalid_argument("plot spec: series_field must be n, t or m");
  if (x_field == series_field)
    throw std::invalid_argument("plot spec: x_field and series_field must differ");
  if (y_field != "normalized_return" && y_field != "raw_return")
    throw std::invalid_argument("plot spec: y_field must be normalized_return or raw_return");
  if (name.empty()) throw std::invalid_argument("plot spec: name must be non-empty");
}

PlotSpec parse_plot_spec_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("plot spec: JSON parse error: ") + e.what());
  }
  for (const auto& [key, value] : root.items()) {
    if (key != "name" && key != "x_field" && key != "series_field" && key != "y_field" &&
        key != "title")
      throw std::invalid_argument("plot spec: unknown key '" + key + "'");
  }
  PlotSpec spec;
  if (root.contains("name")) spec.name = root.at("name").get<std::string>();
  if (root.contains("x_field")) spec.x_field = root.at("x_field").get<std::string>();
  if (root.contains("series_field"))
    spec.series_field = root.at("series_field").get<std::string>();
  if (root.contains("y_field")) spec.y_field = root.at("y_field").get<std::string>();
  if (root.contains("title")) spec.title = root.at("title").get<std::string>();
  spec.validate();
  return spec;
}

PlotSpec parse_plot_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("plot spec: cannot open file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_plot_spec_text(buffer.str());
}

std::vector<PlotData> summarize_records(const std::vector<ExperimentRecord>& records,
                                        const PlotSpec& spec) {
  spec.validate();
  if (records.empty()) throw std::invalid_argument("plot: empty record set");

  std::vector<std::string> families;
  for (const auto& r : records)
    if (std::find(families.begin(), families.end(), r.family_kind) == families.end())
      families.push_back(r.family_kind);
  std::sort(families.begin(), families.end());

  std::vector<PlotData> out;
  for (const auto& family : families) {
    PlotData data;
    data.family_kind = family;

    // MTBC cells keyed by (series value, x value). BC rows repeat across the
    // N x T grid, so they are deduplicated to one value per (m, seed).
    std::map<double, std::map<double, std::vector<double>>> cells;
    std::map<int, std::map<std::uint64_t, double>> bc_cells;
    for (const auto& r : records) {
      if (r.family_kind != family || !r.ok) continue;
      if (r.method == "MTBC") {
        cells[record_field(r, spec.series_field)][record_field(r, spec.x_field)].push_back(
            record_field(r, spec.y_field));
      } else if (r.method == "BC") {
        bc_cells[r.m][r.seed] = record_field(r, spec.y_field);
      }
    }

    for (const auto& [series_value, xs] : cells) {
      PlotSeries series;
      series.series_value = series_value;
      for (const auto& [x, values] : xs) {
        const Stats s = stats_of(values);
        if (s.count == 1) {
          std::ostringstream warning;
          warning << family << ": single seed at " << spec.series_field << "=" << series_value
                  << ", " << spec.x_field << "=" << x << "; zero-width band";
          data.warnings.push_back(warning.str());
        }
        series.points.push_back({x, s.mean, s.std_error, s.count});
      }
      data.series.push_back(std::move(series));
    }
    for (const auto& [m, by_seed] : bc_cells) {
      std::vector<double> values;
      values.reserve(by_seed.size());
      for (const auto& [seed, v] : by_seed) values.push_back(v);
      const Stats s = stats_of(values);
      data.bc_lines.push_back({m, s.mean, s.std_error, s.count});
    }
    out.push_back(std::move(data));
  }
  return out;
}

std::string render_svg(const PlotData& data, const PlotSpec& spec) {
  constexpr int kWidth = 640, kHeight = 480;
  constexpr double kLeft = 70, kRight = 620, kTop = 40, kBottom = 430;

  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool first = true;
  for (const auto& series : data.series) {
    for (const auto& p : series.points) {
      if (first) {
        x_min = x_max = p.x;
        y_min = p.mean - p.std_error;
        y_max = p.mean + p.std_error;
        first = false;
      }
      x_min = std::min(x_min, p.x);
      x_max = std::max(x_max, p.x);
      y_min = std::min(y_min, p.mean - p.std_error);
      y_max = std::max(y_max, p.mean + p.std_error);
    }
  }
  for (const auto& bc : data.bc_lines) {
    y_min = std::min(y_min, bc.mean);
    y_max = std::max(y_max, bc.mean);
  }
  if (x_max == x_min) x_max = x_min + 1;
  const double y_pad = std::max(0.05, 0.08 * (y_max - y_min));
  y_min -= y_pad;
  y_max += y_pad;

  const auto sx = [&](double x) {
    return kLeft + (x - x_min) / (x_max - x_min) * (kRight - kLeft);
  };
  const auto sy = [&](double y) {
    return kBottom - (y - y_min) / (y_max - y_min) * (kBottom - kTop);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    svg << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << spec.title
        << " (" << data.family_kind << ")</text>\n";

  // Axes.
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kBottom << "\" x2=\"" << kRight
      << "\" y2=\"" << kBottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kBottom << "\" stroke=\"black\"/>\n";

  // X ticks at the observed series x positions.
  std::vector<double> x_ticks;
  for (const auto& series : data.series)
    for (const auto& p : series.points)
      if (std::find(x_ticks.begin(), x_ticks.end(), p.x) == x_ticks.end())
        x_ticks.push_back(p.x);
  std::sort(x_ticks.begin(), x_ticks.end());
  for (double x : x_ticks) {
    svg << "<line x1=\"" << fmt6(sx(x)) << "\" y1=\"" << kBottom << "\" x2=\"" << fmt6(sx(x))
        << "\" y2=\"" << kBottom + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << fmt6(sx(x)) << "\" y=\"" << kBottom + 20
        << "\" text-anchor=\"middle\" font-size=\"12\">" << fmt6(x) << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double y = y_min + (y_max - y_min) * i / 5.0;
    svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << fmt6(sy(y)) << "\" x2=\"" << kLeft
        << "\" y2=\"" << fmt6(sy(y)) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << kLeft - 10 << "\" y=\"" << fmt6(sy(y) + 4)
        << "\" text-anchor=\"end\" font-size=\"12\">" << fmt6(y) << "</text>\n";
  }
  svg << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << kBottom + 40
      << "\" text-anchor=\"middle\" font-size=\"13\">" << spec.x_field << "</text>\n";
  svg << "<text x=\"18\" y=\"" << (kTop + kBottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << (kTop + kBottom) / 2 << ")\">" << spec.y_field << "</text>\n";

  // Shaded +-1 stderr bands, then the series lines on top.
  for (std::size_t i = 0; i < data.series.size(); ++i) {
    const auto& series = data.series[i];
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    if (series.points.size() > 1) {
      svg << "<path d=\"M";
      for (const auto& p : series.points)
        svg << ' ' << fmt6(sx(p.x)) << ' ' << fmt6(sy(p.mean + p.std_error));
      for (auto it = series.points.rbegin(); it != series.points.rend(); ++it)
        svg << " L " << fmt6(sx(it->x)) << ' ' << fmt6(sy(it->mean - it->std_error));
      svg << " Z\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    }
  }
  for (std::size_t i = 0; i < data.series.size(); ++i) {
    const auto& series = data.series[i];
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : series.points)
      svg << fmt6(sx(p.x)) << ',' << fmt6(sy(p.mean)) << ' ';
    svg << "\"/>\n";
    svg << "<text x=\"" << kRight - 120 << "\" y=\"" << kTop + 16 + 16 * static_cast<int>(i)
        << "\" font-size=\"12\" fill=\"" << color << "\">" << spec.series_field << "="
        << fmt6(series.series_value) << "</text>\n";
  }

  // Dashed BC reference lines.
  for (std::size_t i = 0; i < data.bc_lines.size(); ++i) {
    const auto& bc = data.bc_lines[i];
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << fmt6(sy(bc.mean)) << "\" x2=\"" << kRight
        << "\" y2=\"" << fmt6(sy(bc.mean))
        << "\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n";
    svg << "<text x=\"" << kLeft + 8 << "\" y=\"" << fmt6(sy(bc.mean) - 5)
        << "\" font-size=\"12\">BC (m=" << bc.m << ")</text>\n";
  }

  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::string> emit_plots(const std::vector<ExperimentRecord>& records,
                                    const PlotSpec& spec, const std::string& out_dir) {
  const std::vector<PlotData> all = summarize_records(records, spec);
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> paths;
  for (const auto& data : all) {
    const std::string path = out_dir + "/" + data.family_kind + "_" + spec.name + ".svg";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("plot: cannot write " + path);
    out << render_svg(data, spec);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace mtil
