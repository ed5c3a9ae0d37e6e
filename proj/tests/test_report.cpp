#include "smart/report.hpp"

#include "smart/hash.hpp"
#include "smart/image_io.hpp"
#include "smart/report_io.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>

namespace smart {
namespace {

namespace fs = std::filesystem;

const SutDescriptor kStub = SutDescriptor::parse("stub:constant-zero");

Rgb8 px(const RgbImage& img, int x, int y) { return img.pixel(x, y); }

// Compares against a checked-in golden file; SMART_UPDATE_GOLDEN=1 rewrites it.
void expect_golden(const std::string& name, const std::string& actual) {
  const fs::path path = fs::path(SMART_TEST_DATA) / "golden" / name;
  if (const char* u = std::getenv("SMART_UPDATE_GOLDEN"); u && std::string(u) == "1") {
    fs::create_directories(path.parent_path());
    test::write_file(path, actual);
  }
  ASSERT_TRUE(fs::exists(path)) << "missing golden " << path;
  EXPECT_EQ(test::slurp(path), actual) << "golden mismatch: " << name;
}

// SMG1 over four frames with a mix of behaviours, one failed call and one
// curved frame.
RunReport table_fixture() {
  const auto& spec = test::bundled("SMG1");
  std::vector<FrameObservations> obs;
  const double rows[4][9] = {
      {0.1, 0.05, 0.0, 0.0, 0.0, -0.1, 0.0, 0.0, -0.3},
      {0.2, 0.01, 0.0, 0.0, 0.0, 0.0, 0.0, -0.05, -0.2},
      {0.0, 0.0, 0.0, -0.1, 0.0, 0.0, 0.0, 0.0, 0.0},
      {0.9, 0.9, 0.9, 0.9, 0.0, -0.9, -0.9, -0.9, -0.9},
  };
  const double gt[4] = {0.0, 0.1, -0.15, 0.5};
  for (int f = 0; f < 4; ++f) {
    FrameObservations o{f, SteeringAngle(gt[f]), test::ok(0.0), {}};
    for (int c = 0; c < 9; ++c) o.follow_ups.push_back(test::ok(rows[f][c]));
    obs.push_back(std::move(o));
  }
  obs[2].follow_ups[6] = test::fail("timeout");
  return seal_report(spec, kStub, {}, obs);
}

TEST(Colormap, EndpointsAndInverse) {
  const auto& sa = steering_colormap();
  EXPECT_EQ(sa[0], (Rgb8{178, 24, 43}));
  EXPECT_EQ(sa[255], (Rgb8{33, 102, 172}));
  const auto& deg = degree_colormap();
  EXPECT_EQ(deg[0], (Rgb8{255, 255, 255}));
  EXPECT_EQ(deg[255], (Rgb8{63, 0, 125}));
  EXPECT_EQ(steering_index(-1.0), 0);
  EXPECT_EQ(steering_index(1.0), 255);
  EXPECT_EQ(degree_index(1.0), 255);
  for (int i = 0; i < 256; ++i) {
    // neighbouring entries may quantise to the same colour
    EXPECT_EQ(sa[sa.nearest_index(sa[i])], sa[i]);
    EXPECT_EQ(deg[deg.nearest_index(deg[i])], deg[i]);
    EXPECT_LE(std::abs(deg.nearest_index(deg[i]) - i), 1);
  }
  for (double v = -1.0; v <= 1.0; v += 0.01)
    EXPECT_NEAR(steering_from_index(sa.nearest_index(sa[steering_index(v)])), v, 1.0 / 255.0);
}

TEST(SaHeatmap, LayoutAndDecoding) {
  const auto r = table_fixture();
  const RgbImage img = render_sa_heatmap(r, {3, 5});
  EXPECT_EQ(img.width(), 4 * 3);
  EXPECT_EQ(img.height(), 10 * 5);
  EXPECT_EQ(px(img, 0, 0), kHatch);
  // frame 3, config right-100 (row 6+1): -0.9
  const auto c = px(img, 3 * 3 + 1, 7 * 5 + 2);
  EXPECT_NEAR(steering_from_index(steering_colormap().nearest_index(c)), -0.9, 1.0 / 255.0);
  // frame 2, config right-200 failed
  EXPECT_EQ(px(img, 2 * 3, 7 * 5 + 4), kUnevaluated);
  RunReport empty = r;
  empty.frames.clear();
  EXPECT_THROW(render_sa_heatmap(empty), EmptyReport);
}

TEST(UbHeatmap, QuietReportIsUniformBackground) {
  const auto& spec = test::bundled("SMG3");
  std::vector<FrameObservations> obs;
  for (int i = 0; i < 5; ++i)
    obs.push_back({i, SteeringAngle(i == 2 ? 0.4 : 0.0), test::ok(0.1), {test::ok(0.1), test::ok(0.1), test::ok(0.1)}});
  const auto r = seal_report(spec, kStub, {}, obs);
  const RgbImage img = render_ub_heatmap(r, 0.0);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const bool curved_col = x / 2 == 2;
      EXPECT_EQ(px(img, x, y), (curved_col ? Rgb8{203, 203, 203} : Rgb8{255, 255, 255})) << x << "," << y;
    }
  EXPECT_THROW(render_ub_heatmap(r, 0.5), UnknownTheta);
}

TEST(UbHeatmap, FullDegreeIsDarkestEndpoint) {
  const auto& spec = test::bundled("SMG3");
  // AD = 2 against a reference AD of 0 gives m = 0.5
  const auto r = seal_report(spec, kStub, {}, {{0, std::nullopt, test::ok(-1.0), {test::ok(-1.0), test::ok(1.0), test::ok(-1.0)}},
                                               {1, std::nullopt, test::ok(0.0), {test::ok(0.0), test::ok(0.0), test::ok(0.0)}}});
  UbHeatmapOptions o;
  o.auto_hotspots = false;
  const RgbImage img = render_ub_heatmap(r, 0.02, o);
  ASSERT_EQ(r.frames[0].cells[1].ub[1].m, 0.5);
  EXPECT_EQ(px(img, 0, 12 + 3), degree_colormap()[degree_index(0.5)]);

  const auto full = seal_report(spec, kStub, {}, {{0, std::nullopt, test::ok(-1.0), {test::ok(-1.0), test::ok(1.0), test::ok(-1.0)}}});
  RunReport r2 = full;
  r2.frames[0].cells[1].ub[0] = UBRecord(MetricKind::Unchange, 1.0, 0.0);
  EXPECT_EQ(px(render_ub_heatmap(r2, 0.0, o), 1, 20), (Rgb8{63, 0, 125}));
}

RunReport density_fixture(std::size_t n, std::size_t first_hot, std::size_t last_hot) {
  const auto& spec = test::bundled("SMG3");
  std::vector<FrameObservations> obs;
  for (std::size_t i = 0; i < n; ++i) {
    const bool hot = i >= first_hot && i <= last_hot;
    obs.push_back({static_cast<std::int64_t>(i), std::nullopt, test::ok(0.0),
                   {test::ok(0.0), test::ok(hot ? 0.5 : 0.0), test::ok(hot ? 0.5 : 0.0)}});
  }
  return seal_report(spec, kStub, {}, obs);
}

TEST(Hotspots, WindowUnionTrimmedToActiveFrames) {
  const auto r = density_fixture(100, 20, 59);
  const auto d = ub_density(r, 0.0);
  EXPECT_EQ(d[19], 0.0);
  EXPECT_EQ(d[20], 1.0);
  EXPECT_EQ(detect_hotspots(r, 0.0, {10, 0.5}), (std::vector<FrameSpan>{{20, 59}}));
  EXPECT_TRUE(detect_hotspots(r, 0.0, {100, 0.5}).empty());  // 40% overall
  EXPECT_EQ(detect_hotspots(r, 0.0, {100, 0.3}), (std::vector<FrameSpan>{{20, 59}}));
  EXPECT_TRUE(detect_hotspots(density_fixture(30, 99, 99), 0.0).empty());
  // window capped at the report length
  EXPECT_EQ(detect_hotspots(density_fixture(10, 0, 9), 0.0), (std::vector<FrameSpan>{{0, 9}}));
}

TEST(Hotspots, RectangleOutlinesSpan) {
  const auto r = density_fixture(100, 20, 59);
  UbHeatmapOptions o;
  o.hotspot = {10, 0.5};
  const RgbImage img = render_ub_heatmap(r, 0.0, o);
  EXPECT_EQ(px(img, 40, 0), kHotspot);
  EXPECT_EQ(px(img, 40, img.height() - 1), kHotspot);
  EXPECT_EQ(px(img, 40, 5), kHotspot);
  EXPECT_EQ(px(img, 119, 20), kHotspot);
  EXPECT_NE(px(img, 41, 20), kHotspot);
  EXPECT_NE(px(img, 39, 0), kHotspot);
}

TEST(Tables, GoldenText) {
  const auto t = render_tables(table_fixture());
  expect_golden("table_smg1.txt", t.text);
  expect_golden("table_smg1.csv", t.csv);
  EXPECT_EQ(percent(std::nullopt), "n/a");
  EXPECT_EQ(percent(0.241), "24.1%");
  EXPECT_EQ(percent(1.0 / 3.0), "33.3%");
}

TEST(ReportIo, CsvQuoting) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
  EXPECT_EQ(theta_column("u", 0.02), "u@0.02");
}

TEST(ReportIo, GoldenCsvs) {
  const auto r = table_fixture();
  expect_golden("results_smg1.csv", results_csv(r));
  expect_golden("aggregates_smg1.csv", aggregates_csv(r));
}

TEST(ReportIo, JsonRoundTrip) {
  std::mt19937_64 rng(17);
  for (const auto& spec : default_smg_specs()) {
    RunSettings s;
    s.thetas = {0.0, 0.01, 0.3};
    s.seed = 1234567890123ULL;
    const auto r = seal_report(spec, kStub, s, test::random_observations(spec, 25, rng));
    const auto back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
    EXPECT_EQ(back.spec, r.spec);
    EXPECT_EQ(back.seed, r.seed);
    EXPECT_EQ(back.observations(), r.observations());
    EXPECT_EQ(results_csv(back), results_csv(r));
    EXPECT_EQ(aggregates_csv(back), aggregates_csv(r));
  }
}

TEST(ReportIo, WriteAndReadRunDirectory) {
  const auto dir = test::temp_dir("report-dir");
  const auto r = table_fixture();
  write_run_outputs(r, dir, {{{"corpus", "x"}}, {}, {"smart", "run"}});
  for (const char* f : {"report.json", "results.csv", "aggregates.csv", "latency.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto manifest = nlohmann::json::parse(test::slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["output_hashes"]["results.csv"], sha256_hex(test::slurp(dir / "results.csv")));
  EXPECT_EQ(results_csv(read_report(dir)), results_csv(r));

  EXPECT_THROW(read_report(dir / "nope"), ReportFormatError);
  test::write_file(dir / "report.json", "{\"format\":\"smart-report/1\",");
  EXPECT_THROW(read_report(dir), ReportFormatError);
  test::write_file(dir / "report.json", "{\"format\":\"other\"}");
  EXPECT_THROW(read_report(dir), ReportFormatError);
}

TEST(Render, PngBytesAreDeterministic) {
  const auto r = table_fixture();
  EXPECT_EQ(encode_png(render_sa_heatmap(r)), encode_png(render_sa_heatmap(r)));
  EXPECT_EQ(encode_png(render_ub_heatmap(r, 0.02)), encode_png(render_ub_heatmap(r, 0.02)));
}

}  // namespace
}  // namespace smart
