#pragma once

#include "smart/pipeline.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace smart {

using Rgb8 = std::array<std::uint8_t, 3>;

/// 256-entry colour table, linear between anchor colours.
class Colormap {
 public:
  struct Anchor {
    double position;  // in [0, 1]
    Rgb8 color;
  };
  explicit Colormap(std::vector<Anchor> anchors);

  const Rgb8& operator[](int index) const { return table_.at(static_cast<std::size_t>(index)); }
  /// Index of the exactly matching entry, or the nearest in RGB distance.
  int nearest_index(const Rgb8& color) const;

 private:
  std::array<Rgb8, 256> table_{};
};

/// Steering angles: index 0 is -1 (rightward, red), 255 is +1 (leftward,
/// blue), through near-white at 0.
//   anchors: 0.0 (178,24,43)  0.5 (247,247,247)  1.0 (33,102,172)
const Colormap& steering_colormap();
/// Undesirable-behaviour degree: index 0 is m = 0 (white), 255 is m = 1
/// (deep purple).
//   anchors: 0.0 (255,255,255)  0.5 (158,154,200)  1.0 (63,0,125)
const Colormap& degree_colormap();

int steering_index(double sa);
double steering_from_index(int index);
int degree_index(double m);

inline constexpr Rgb8 kUnevaluated{0, 0, 0};
inline constexpr Rgb8 kHatch{0, 160, 60};
inline constexpr Rgb8 kCurvedGrey{150, 150, 150};
inline constexpr Rgb8 kHotspot{220, 20, 20};

struct HeatmapLayout {
  int cell_width = 2;    // pixels per frame
  int cell_height = 12;  // pixels per row
};

/// Rows: source angles (hatched) then configs in spec order; one column
/// block per frame.
RgbImage render_sa_heatmap(const RunReport& report, const HeatmapLayout& layout = {});

/// Inclusive range of frame indices (positions in report.frames).
struct FrameSpan {
  std::size_t first = 0;
  std::size_t last = 0;
  friend bool operator==(const FrameSpan&, const FrameSpan&) = default;
};

struct HotspotParams {
  std::size_t window = 50;  // frames, capped at the report length
  double density = 0.5;     // flag windows whose mean exceeds this
};

/// Per-frame fraction of evaluable non-reference cells with u = 1 at theta.
std::vector<double> ub_density(const RunReport& report, double theta);

/// Union of flagged sliding windows, trimmed to frames with nonzero density.
std::vector<FrameSpan> detect_hotspots(const RunReport& report, double theta, const HotspotParams& params = {});

struct UbHeatmapOptions {
  HeatmapLayout layout;
  bool auto_hotspots = true;
  HotspotParams hotspot;
  std::vector<FrameSpan> extra_hotspots;
};

/// Cells with u = 1 at theta take the degree colour of m; others stay at the
/// white end. Curved frames are greyed; hotspots are outlined in red.
/// Throws UnknownTheta when theta is not one of report.thetas.
RgbImage render_ub_heatmap(const RunReport& report, double theta, const UbHeatmapOptions& options = {});

struct Tables {
  std::string text;
  std::string csv;
};

/// Rollups and per-config rates, percentages to one decimal place.
Tables render_tables(const RunReport& report);

/// Percentage with one decimal, or "n/a".
std::string percent(const std::optional<double>& rate);

}  // namespace smart
