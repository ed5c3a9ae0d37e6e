#include "smart/report.hpp"

#include "smart/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace smart {

Colormap::Colormap(std::vector<Anchor> anchors) {
  for (int i = 0; i < 256; ++i) {
    const double p = i / 255.0;
    std::size_t k = 0;
    while (k + 2 < anchors.size() && p > anchors[k + 1].position) ++k;
    const auto& a = anchors[k];
    const auto& b = anchors[k + 1];
    const double t = std::clamp((p - a.position) / (b.position - a.position), 0.0, 1.0);
    for (int c = 0; c < 3; ++c)
      table_[i][c] = static_cast<std::uint8_t>(std::lround(a.color[c] + t * (b.color[c] - a.color[c])));
  }
}

int Colormap::nearest_index(const Rgb8& color) const {
  int best = 0;
  long best_d = -1;
  for (int i = 0; i < 256; ++i) {
    long d = 0;
    for (int c = 0; c < 3; ++c) {
      const long diff = static_cast<long>(table_[i][c]) - color[c];
      d += diff * diff;
    }
    if (best_d < 0 || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

const Colormap& steering_colormap() {
  static const Colormap map({{0.0, {178, 24, 43}}, {0.5, {247, 247, 247}}, {1.0, {33, 102, 172}}});
  return map;
}

const Colormap& degree_colormap() {
  static const Colormap map({{0.0, {255, 255, 255}}, {0.5, {158, 154, 200}}, {1.0, {63, 0, 125}}});
  return map;
}

int steering_index(double sa) { return static_cast<int>(std::lround((std::clamp(sa, -1.0, 1.0) + 1.0) / 2.0 * 255.0)); }
double steering_from_index(int index) { return index / 255.0 * 2.0 - 1.0; }
int degree_index(double m) { return static_cast<int>(std::lround(std::clamp(m, 0.0, 1.0) * 255.0)); }

namespace {

void fill_cell(RgbImage& img, const HeatmapLayout& l, std::size_t col, std::size_t row, const Rgb8& c) {
  const int x0 = static_cast<int>(col) * l.cell_width;
  const int y0 = static_cast<int>(row) * l.cell_height;
  for (int y = y0; y < y0 + l.cell_height; ++y)
    for (int x = x0; x < x0 + l.cell_width; ++x) img.set_pixel(x, y, c);
}

void check_layout(const HeatmapLayout& l) {
  if (l.cell_width < 1 || l.cell_height < 1) throw InvalidValue("heatmap cells must be at least 1x1");
}

}  // namespace

RgbImage render_sa_heatmap(const RunReport& report, const HeatmapLayout& layout) {
  if (report.frames.empty()) throw EmptyReport("report has no frames");
  check_layout(layout);
  const std::size_t rows = report.spec.configs.size() + 1;
  RgbImage img(static_cast<int>(report.frames.size()) * layout.cell_width, static_cast<int>(rows) * layout.cell_height);
  const auto& cmap = steering_colormap();

  for (std::size_t fi = 0; fi < report.frames.size(); ++fi) {
    const auto& f = report.frames[fi];
    fill_cell(img, layout, fi, 0, f.sa_s.ok() ? cmap[steering_index(f.sa_s.sa->value())] : kUnevaluated);
    for (std::size_t ci = 0; ci < f.cells.size(); ++ci) {
      const auto& sa = f.cells[ci].sa_f.sa;
      fill_cell(img, layout, fi, ci + 1, sa ? cmap[steering_index(sa->value())] : kUnevaluated);
    }
  }
  // diagonal hatch over the source row
  for (int y = 0; y < layout.cell_height; ++y)
    for (int x = 0; x < img.width(); ++x)
      if ((x + y) % 4 == 0) img.set_pixel(x, y, kHatch);
  return img;
}

std::vector<double> ub_density(const RunReport& report, double theta) {
  const auto it = std::find(report.thetas.begin(), report.thetas.end(), theta);
  if (it == report.thetas.end()) throw UnknownTheta("theta " + std::to_string(theta) + " not in report");
  const auto t = static_cast<std::size_t>(it - report.thetas.begin());
  std::vector<double> density;
  density.reserve(report.frames.size());
  for (const auto& f : report.frames) {
    std::size_t hits = 0, n = 0;
    for (std::size_t ci = 0; ci < f.cells.size(); ++ci) {
      if (ci == report.spec.reference_index || !f.cells[ci].evaluable()) continue;
      ++n;
      hits += f.cells[ci].ub[t].u ? 1 : 0;
    }
    density.push_back(n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n));
  }
  return density;
}

std::vector<FrameSpan> detect_hotspots(const RunReport& report, double theta, const HotspotParams& params) {
  const auto density = ub_density(report, theta);
  const std::size_t n = density.size();
  std::vector<FrameSpan> spans;
  if (n == 0) return spans;
  const std::size_t w = std::clamp<std::size_t>(params.window, 1, n);

  std::vector<bool> flagged(n, false);
  double sum = 0.0;
  for (std::size_t i = 0; i < w; ++i) sum += density[i];
  for (std::size_t start = 0; start + w <= n; ++start) {
    if (start > 0) sum += density[start + w - 1] - density[start - 1];
    if (sum / static_cast<double>(w) > params.density)
      for (std::size_t i = start; i < start + w; ++i) flagged[i] = true;
  }

  for (std::size_t i = 0; i < n;) {
    if (!flagged[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && flagged[j + 1]) ++j;
    std::size_t a = i, b = j;
    while (a < b && density[a] == 0.0) ++a;
    while (b > a && density[b] == 0.0) --b;
    if (density[a] > 0.0) spans.push_back({a, b});
    i = j + 1;
  }
  return spans;
}

RgbImage render_ub_heatmap(const RunReport& report, double theta, const UbHeatmapOptions& options) {
  const auto it = std::find(report.thetas.begin(), report.thetas.end(), theta);
  if (it == report.thetas.end()) throw UnknownTheta("theta " + std::to_string(theta) + " not in report");
  if (report.frames.empty()) throw EmptyReport("report has no frames");
  const auto& layout = options.layout;
  check_layout(layout);
  const auto t = static_cast<std::size_t>(it - report.thetas.begin());
  const std::size_t rows = report.spec.configs.size();
  RgbImage img(static_cast<int>(report.frames.size()) * layout.cell_width, static_cast<int>(rows) * layout.cell_height);
  const auto& cmap = degree_colormap();

  for (std::size_t fi = 0; fi < report.frames.size(); ++fi) {
    const auto& f = report.frames[fi];
    for (std::size_t ci = 0; ci < f.cells.size(); ++ci) {
      const auto& cell = f.cells[ci];
      Rgb8 c = kUnevaluated;
      if (cell.evaluable()) c = cmap[cell.ub[t].u ? degree_index(cell.ub[t].m) : 0];
      if (f.curved)
        for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>((c[k] + kCurvedGrey[k] + 1) / 2);
      fill_cell(img, layout, fi, ci, c);
    }
  }

  std::vector<FrameSpan> spans = options.extra_hotspots;
  if (options.auto_hotspots) {
    const auto found = detect_hotspots(report, theta, options.hotspot);
    spans.insert(spans.end(), found.begin(), found.end());
  }
  for (const auto& s : spans) {
    if (s.first > s.last || s.last >= report.frames.size()) continue;
    const int x0 = static_cast<int>(s.first) * layout.cell_width;
    const int x1 = static_cast<int>(s.last + 1) * layout.cell_width - 1;
    const int y1 = img.height() - 1;
    for (int x = x0; x <= x1; ++x) {
      img.set_pixel(x, 0, kHotspot);
      img.set_pixel(x, y1, kHotspot);
    }
    for (int y = 0; y <= y1; ++y) {
      img.set_pixel(x0, y, kHotspot);
      img.set_pixel(x1, y, kHotspot);
    }
  }
  return img;
}

std::string percent(const std::optional<double>& rate) {
  if (!rate) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", *rate * 100.0);
  return buf;
}

Tables render_tables(const RunReport& report) {
  struct Row {
    std::string name;
    std::vector<std::string> cells;
  };
  std::vector<std::string> header{"row"};
  for (double t : report.thetas) header.push_back(theta_column("UB", t));
  header.push_back("violations");
  header.push_back("errors");

  std::vector<Row> rows;
  const auto& agg = report.aggregates;
  auto rollup_row = [&](const Rollup& r) {
    Row row{r.name, {}};
    for (const auto& rate : r.ub_rate) row.cells.push_back(percent(rate));
    row.cells.push_back(percent(r.violation_rate));
    row.cells.push_back("");
    rows.push_back(std::move(row));
  };
  rollup_row(agg.smg);
  if (agg.left) rollup_row(*agg.left);
  if (agg.right) rollup_row(*agg.right);
  for (const auto& c : agg.configs) {
    Row row{c.reference ? c.label + " (reference)" : c.label, {}};
    for (const auto& r : c.ub) row.cells.push_back(percent(r.rate()));
    row.cells.push_back(percent(c.violations.rate()));
    row.cells.push_back(std::to_string(c.errors));
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t k = 0; k < header.size(); ++k) width[k] = header[k].size();
  for (const auto& r : rows) {
    width[0] = std::max(width[0], r.name.size());
    for (std::size_t k = 0; k < r.cells.size(); ++k) width[k + 1] = std::max(width[k + 1], r.cells[k].size());
  }

  std::ostringstream text;
  text << report.spec.name;
  if (!report.spec.description.empty()) text << ": " << report.spec.description;
  text << " (" << (report.include_curved ? "all roads" : "straight roads only") << ", "
       << agg.frames_total - (report.include_curved ? 0 : agg.frames_curved) << " of " << agg.frames_total
       << " frames)\n";
  auto line = [&](const std::string& first, const std::vector<std::string>& rest) {
    text << first << std::string(width[0] - first.size(), ' ');
    for (std::size_t k = 0; k < rest.size(); ++k)
      text << "  " << std::string(width[k + 1] - rest[k].size(), ' ') << rest[k];
    text << '\n';
  };
  line(header[0], {header.begin() + 1, header.end()});
  for (const auto& r : rows) line(r.name, r.cells);

  std::ostringstream csv;
  for (std::size_t k = 0; k < header.size(); ++k) csv << (k ? "," : "") << csv_field(header[k]);
  csv << "\r\n";
  for (const auto& r : rows) {
    csv << csv_field(r.name);
    for (const auto& c : r.cells) csv << ',' << csv_field(c);
    csv << "\r\n";
  }
  return {text.str(), csv.str()};
}

}  // namespace smart
