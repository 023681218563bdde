#pragma once

#include <string>
#include <vector>

#include "mtil/experiment.hpp"

namespace mtil {

struct PlotSpec {
  std::string name = "fig";                    // output file stem
  std::string x_field = "t";                   // "t" or "m"
  std::string series_field = "n";              // one line per value: "n", "m" or "t"
  std::string y_field = "normalized_return";   // "normalized_return" or "raw_return"
  std::string title;

  void validate() const;
};

PlotSpec parse_plot_spec(const std::string& path);
PlotSpec parse_plot_spec_text(const std::string& text);

struct PlotPoint {
  double x = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  int count = 0;  // seeds aggregated into this point
};

struct PlotSeries {
  double series_value = 0.0;
  std::vector<PlotPoint> points;
};

struct BcReference {
  int m = 0;
  double mean = 0.0;
  double std_error = 0.0;
  int count = 0;
};

struct PlotData {
  std::string family_kind;
  std::vector<PlotSeries> series;    // MTBC, one per series value
  std::vector<BcReference> bc_lines;  // dashed horizontal references
  std::vector<std::string> warnings;  // e.g. single-seed zero-width bands
};

/// Means and standard errors over seeds, one PlotData per family kind in the
/// records. NA rows are skipped.
std::vector<PlotData> summarize_records(const std::vector<ExperimentRecord>& records,
                                        const PlotSpec& spec);

/// Deterministic standalone SVG: one polyline per series, a shaded +-1
/// standard-error band, dashed BC reference lines.
std::string render_svg(const PlotData& data, const PlotSpec& spec);

/// Writes one SVG per family kind into out_dir and returns the paths.
/// Throws on an empty record set.
std::vector<std::string> emit_plots(const std::vector<ExperimentRecord>& records,
                                    const PlotSpec& spec, const std::string& out_dir);

}  // namespace mtil
