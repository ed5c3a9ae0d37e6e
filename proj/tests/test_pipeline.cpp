#include "smart/pipeline.hpp"

#include "smart/report_io.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace smart {
namespace {

namespace fs = std::filesystem;

const SutDescriptor kStub = SutDescriptor::parse("stub:constant-zero");

struct Harness {
  SpriteLibrary sprites = SpriteLibrary::builtin();
  RunOptions options;

  Harness() {
    options.transform.sprites = &sprites;
    options.scratch_dir = test::temp_dir("pipeline-scratch");
  }

  RunReport run(const SMGSpec& spec, const std::vector<SourceFrame>& corpus, ModelFactory factory) {
    return run_testing(spec, corpus, kStub, factory, options);
  }
};

ModelFactory scripted(std::string json) {
  return [json] { return std::make_unique<ScriptedStub>(ScriptedStub::parse(json)); };
}

ModelFactory centroid(double gain) {
  return [gain] { return std::make_unique<BrightnessCentroidStub>(gain); };
}

const char* kFig1Script = R"({"entries":[
  {"frame_id":0,"config":"source","sa":0.02},
  {"frame_id":0,"config":"car-red","sa":0.02},
  {"frame_id":0,"config":"car-blue","sa":-0.09}]})";

TEST(Pipeline, ConstantZeroIsAllQuiet) {
  Harness h;
  const auto corpus = test::synthetic_corpus(5, 1);
  for (const auto& spec : default_smg_specs()) {
    const auto r = h.run(spec, corpus, [] { return std::make_unique<ConstantZeroStub>(); });
    EXPECT_EQ(r.error_cells(), 0u);
    for (const auto& f : r.frames)
      for (const auto& c : f.cells) {
        ASSERT_TRUE(c.evaluable());
        EXPECT_EQ(*c.ad, 0.0);
        EXPECT_FALSE(*c.mr_violation);
        for (const auto& u : c.ub) {
          EXPECT_EQ(u.m, 0.0);
          EXPECT_FALSE(u.u);
        }
      }
    for (const auto& rate : r.aggregates.smg.ub_rate) EXPECT_EQ(rate, 0.0);
  }
}

TEST(Pipeline, MotivatingExample) {
  Harness h;
  h.options.settings.thetas = {0.02};
  h.options.settings.kappa = 0.12;
  const auto corpus = test::synthetic_corpus(1, 2);
  const auto r = h.run(test::bundled("SMG3"), corpus, scripted(kFig1Script));
  const auto& cells = r.frames.at(0).cells;
  ASSERT_EQ(cells.size(), 3u);
  EXPECT_FALSE(*cells[0].mr_violation);
  EXPECT_FALSE(*cells[1].mr_violation);
  EXPECT_NEAR(cells[1].ub[0].m, 0.0275, 1e-15);
  EXPECT_TRUE(cells[1].ub[0].u);
  EXPECT_FALSE(cells[0].ub[0].u);
  EXPECT_FALSE(cells[2].evaluable());  // not scripted
  EXPECT_EQ(r.error_cells(), 1u);
  EXPECT_EQ(r.aggregates.configs[1].ub[0].rate(), 1.0);
  EXPECT_EQ(r.aggregates.configs[1].violations.rate(), 0.0);
}

TEST(Aggregate, HandCountedRollups) {
  // One frame, source 0, center 0. Left configs use the leftward metric, so
  // only positive ADs count; right configs use rightward.
  const auto& spec = test::bundled("SMG1");
  FrameObservations obs{0, std::nullopt, test::ok(0.0), {}};
  for (double sa : {0.1, 0.1, -0.1, 0.0, 0.0, 0.1, 0.1, 0.1, 0.1}) obs.follow_ups.push_back(test::ok(sa));
  RunSettings s;
  s.thetas = {0.0};
  const auto r = seal_report(spec, kStub, s, {obs});
  ASSERT_TRUE(r.aggregates.left && r.aggregates.right);
  EXPECT_EQ(r.aggregates.left->ub_rate[0], 0.5);
  EXPECT_EQ(r.aggregates.right->ub_rate[0], 0.0);
  EXPECT_EQ(r.aggregates.smg.ub_rate[0], 0.25);
  EXPECT_EQ(r.aggregates.smg.members.size(), 8u);
  EXPECT_EQ(r.aggregates.configs[4].ub[0], (RateCount{0, 1}));
}

TEST(Aggregate, RollupIsUnweightedMeanOfDefinedRates) {
  const auto& spec = test::bundled("SMG3");
  RunSettings s;
  s.thetas = {0.0};
  // car-blue hits on both frames; car-grey fails on frame 1 and hits on frame 0
  std::vector<FrameObservations> obs{
      {0, std::nullopt, test::ok(0.0), {test::ok(0.0), test::ok(0.2), test::ok(0.2)}},
      {1, std::nullopt, test::ok(0.0), {test::ok(0.0), test::ok(0.2), test::fail("boom")}},
  };
  const auto r = seal_report(spec, kStub, s, obs);
  EXPECT_EQ(r.aggregates.configs[2].errors, 1u);
  EXPECT_EQ(r.aggregates.configs[2].ub[0], (RateCount{1, 1}));
  EXPECT_EQ(r.aggregates.smg.ub_rate[0], 1.0);
  EXPECT_FALSE(r.aggregates.left);
}

TEST(Aggregate, ErrorsPropagateFromSourceAndReference) {
  const auto& spec = test::bundled("SMG3");
  RunSettings s;
  std::vector<FrameObservations> obs{
      {0, std::nullopt, test::fail("source down"), {test::ok(0.0), test::ok(0.1), test::ok(0.1)}},
      {1, std::nullopt, test::ok(0.0), {test::fail("ref down"), test::ok(0.1), test::ok(0.1)}},
  };
  const auto r = seal_report(spec, kStub, s, obs);
  for (const auto& f : r.frames)
    for (const auto& c : f.cells) EXPECT_FALSE(c.evaluable());
  EXPECT_EQ(r.error_cells(), 2u);
  EXPECT_EQ(r.aggregates.configs[1].errors, 2u);
  EXPECT_FALSE(r.aggregates.smg.ub_rate[0]);
  // violations only need source and follow-up
  EXPECT_EQ(r.aggregates.configs[1].violations, (RateCount{0, 1}));
  const std::string csv = results_csv(r);
  EXPECT_NE(csv.find("source: source down"), std::string::npos);
  EXPECT_NE(csv.find("reference unavailable"), std::string::npos);
}

TEST(Aggregate, AuditCatchesTampering) {
  const auto& spec = test::bundled("SMG3");
  auto r = seal_report(spec, kStub, {}, {{0, std::nullopt, test::ok(0.0), {test::ok(0.0), test::ok(0.5), test::ok(0.0)}}});
  EXPECT_NO_THROW(audit_report(r));
  r.aggregates.configs[1].ub[0].hits = 0;
  EXPECT_THROW(audit_report(r), Error);
  auto flipped = seal_report(spec, kStub, {}, {{0, std::nullopt, test::ok(0.0), {test::ok(0.0), test::ok(0.5), test::ok(0.0)}}});
  flipped.frames[0].cells[1].ub[0].u = false;
  EXPECT_THROW(audit_report(flipped), Error);
}

// 1000 frames of which exactly 241 have |ground truth| > 0.2; boundary
// values of exactly 0.2 stay straight.
std::vector<FrameObservations> curved_observations(const SMGSpec& spec) {
  std::vector<FrameObservations> obs;
  for (int i = 0; i < 1000; ++i) {
    const bool curved = i % 1000 < 241;
    const double gt = curved ? (i % 2 ? 0.25 : -0.6) : (i % 3 == 0 ? 0.2 : -0.05);
    FrameObservations o{i, SteeringAngle(gt), test::ok(0.0), {}};
    // curved frames misbehave, straight frames do not
    for (std::size_t c = 0; c < spec.configs.size(); ++c)
      o.follow_ups.push_back(test::ok(curved && c != spec.reference_index ? 0.3 : 0.0));
    obs.push_back(std::move(o));
  }
  return obs;
}

TEST(CurvedMask, ExactFraction) {
  const auto& spec = test::bundled("SMG3");
  const auto obs = curved_observations(spec);
  std::vector<std::optional<SteeringAngle>> gt;
  for (const auto& o : obs) gt.push_back(o.ground_truth);
  const auto mask = mask_curved(gt);
  EXPECT_EQ(mask.curved_count(), 241u);
  EXPECT_EQ(mask.curved_fraction(), 0.241);
  EXPECT_TRUE(mask.ground_truth_available);

  RunSettings s;
  const auto masked = seal_report(spec, kStub, s, obs);
  EXPECT_EQ(masked.aggregates.frames_curved, 241u);
  EXPECT_EQ(masked.aggregates.configs[1].excluded_curved, 241u);
  EXPECT_EQ(masked.aggregates.configs[1].ub[0], (RateCount{0, 759}));
  EXPECT_EQ(masked.aggregates.smg.ub_rate[0], 0.0);

  s.include_curved = true;
  const auto all = seal_report(spec, kStub, s, obs);
  EXPECT_EQ(all.aggregates.configs[1].ub[0], (RateCount{241, 1000}));
  EXPECT_EQ(all.aggregates.configs[1].excluded_curved, 0u);
}

TEST(CurvedMask, NoGroundTruthMeansStraight) {
  const auto mask = mask_curved(std::vector<std::optional<SteeringAngle>>(4));
  EXPECT_EQ(mask.curved_count(), 0u);
  EXPECT_FALSE(mask.ground_truth_available);
  EXPECT_EQ(mask.frames_without_ground_truth, 4u);
  const auto r = seal_report(test::bundled("SMG3"), kStub, {},
                             {{0, std::nullopt, test::ok(0.0), {test::ok(0.0), test::ok(0.0), test::ok(0.0)}}});
  EXPECT_FALSE(r.ground_truth_available);
  EXPECT_FALSE(r.stats);
  EXPECT_FALSE(r.stats_note.empty());
}

TEST(Pipeline, StatsAndGroundTruthReference) {
  const auto& spec = test::bundled("SMG3");
  std::vector<FrameObservations> obs{
      {0, SteeringAngle(0.1), test::ok(0.0), {test::ok(0.1), test::ok(0.3), test::ok(0.1)}},
      {1, SteeringAngle(-0.1), test::ok(0.0), {test::ok(-0.1), test::ok(-0.1), test::ok(-0.1)}},
  };
  RunSettings s;
  s.thetas = {0.0};
  const auto r = seal_report(spec, kStub, s, obs);
  ASSERT_TRUE(r.stats);
  EXPECT_NEAR(r.stats->mae, 0.1, 1e-15);
  EXPECT_FALSE(r.stats->corr);  // source is constant

  s.ground_truth_reference = true;
  const auto g = seal_report(spec, kStub, s, obs);
  // SA* = ground truth: frame 0 car-blue AD = 0.2 vs reference AD = 0
  EXPECT_NEAR(*g.frames[0].cells[1].ad, 0.2, 1e-15);
  EXPECT_EQ(*g.frames[0].cells[1].ad_ref, 0.0);
  EXPECT_EQ(g.aggregates.configs[1].ub[0], (RateCount{1, 2}));
}

TEST(Pipeline, CentroidModelFlagsFarOffsets) {
  Harness h;
  const auto corpus = test::synthetic_corpus(6, 3);
  h.options.settings.thetas = {0.0};
  // A model that steers away from the car hits the directional metrics.
  const auto r = h.run(test::bundled("SMG1"), corpus, centroid(-1.0));
  const auto& cfg = r.aggregates.configs;
  EXPECT_GT(*cfg[0].ub[0].rate(), *cfg[4].ub[0].rate());
  EXPECT_GT(*cfg[8].ub[0].rate(), *cfg[4].ub[0].rate());

  SMGSpec unchange = test::bundled("SMG1");
  for (auto& c : unchange.configs) c.metric.reset();
  const auto u = h.run(unchange, corpus, centroid(1.0));
  EXPECT_GT(*u.aggregates.configs[0].ub[0].rate(), *u.aggregates.configs[4].ub[0].rate());
}

TEST(Pipeline, TransformErrorsAreRecordedPerCell) {
  Harness h;
  SMGSpec spec = test::bundled("SMG1");
  spec.configs[0].lateral_offset_px = 5000;
  const auto r = h.run(spec, test::synthetic_corpus(2, 1), centroid(1.0));
  EXPECT_EQ(r.error_cells(), 2u);
  EXPECT_EQ(r.frames[0].cells[0].sa_f.error.value().rfind("transform: ", 0), 0u);
  EXPECT_TRUE(r.frames[0].cells[1].evaluable());
}

TEST(Pipeline, PreconditionsFailBeforeWork) {
  Harness h;
  EXPECT_THROW(h.run(test::bundled("SMG3"), {}, centroid(1.0)), CorpusEmpty);

  class Unreachable final : public SteeringModel {
   public:
    std::string name() const override { return "down"; }
    void open() override { throw SutError("connection refused"); }
    double predict(const ExecutionRequest&) override {
      ADD_FAILURE() << "predict called";
      return 0;
    }
  };
  h.options.journal = test::temp_dir("unreachable") / "journal.jsonl";
  EXPECT_THROW(h.run(test::bundled("SMG3"), test::synthetic_corpus(2, 1), [] { return std::make_unique<Unreachable>(); }),
               SutUnreachable);
  EXPECT_FALSE(fs::exists(*h.options.journal));
}

TEST(Pipeline, LanesDoNotChangeResults) {
  Harness h;
  const auto corpus = test::synthetic_corpus(9, 5);
  const auto& spec = test::bundled("SMG4");
  h.options.lanes = 1;
  const auto one = h.run(spec, corpus, centroid(1.0));
  h.options.lanes = 4;
  const auto four = h.run(spec, corpus, centroid(1.0));
  EXPECT_EQ(results_csv(one), results_csv(four));
  EXPECT_EQ(aggregates_csv(one), aggregates_csv(four));
  EXPECT_EQ(four.latencies.size(), 9u * 7u);
}

TEST(Pipeline, InterruptAndResume) {
  Harness h;
  const auto corpus = test::synthetic_corpus(8, 6);
  const auto& spec = test::bundled("SMG2");
  const auto straight = h.run(spec, corpus, centroid(1.0));

  const auto dir = test::temp_dir("resume");
  h.options.journal = dir / "journal.jsonl";
  h.options.stop_after_frames = 3;
  EXPECT_THROW(h.run(spec, corpus, centroid(1.0)), RunInterrupted);

  int calls = 0;
  h.options.stop_after_frames.reset();
  h.options.resume = true;
  const auto resumed = h.run(spec, corpus, [&] {
    ++calls;
    return std::make_unique<BrightnessCentroidStub>(1.0);
  });
  EXPECT_EQ(results_csv(resumed), results_csv(straight));
  EXPECT_EQ(resumed.latencies.size(), 5u * 10u);  // only the remaining frames ran
  EXPECT_EQ(calls, 1);

  // A different seed changes the fingerprint, so nothing is reused.
  h.options.settings.seed = 99;
  const auto reseeded = h.run(spec, corpus, centroid(1.0));
  EXPECT_EQ(reseeded.latencies.size(), 8u * 10u);
}

TEST(Pipeline, TornJournalLineIsDiscarded) {
  Harness h;
  const auto corpus = test::synthetic_corpus(4, 6);
  const auto& spec = test::bundled("SMG3");
  const auto dir = test::temp_dir("torn");
  h.options.journal = dir / "journal.jsonl";
  const auto full = h.run(spec, corpus, centroid(1.0));
  std::string text = test::slurp(*h.options.journal);
  text.resize(text.size() - 20);  // cut into the last frame
  test::write_file(*h.options.journal, text);
  h.options.resume = true;
  const auto resumed = h.run(spec, corpus, centroid(1.0));
  EXPECT_EQ(resumed.latencies.size(), 4u);  // last frame: source + 3 configs
  EXPECT_EQ(results_csv(resumed), results_csv(full));
}

}  // namespace
}  // namespace smart
