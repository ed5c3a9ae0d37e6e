#pragma once

#include "smart/core_types.hpp"
#include "smart/metrics.hpp"
#include "smart/sut.hpp"
#include "smart/transform.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace smart {

inline const std::vector<double> kDefaultThetas{0.0, 0.02};

/// One SUT call as observed: an angle or an error message.
struct Observation {
  std::optional<SteeringAngle> sa;
  std::optional<std::string> error;

  bool ok() const { return sa.has_value(); }
  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Everything the SUT produced for one frame, before any metric is derived.
struct FrameObservations {
  std::int64_t frame_id = 0;
  std::optional<SteeringAngle> ground_truth;
  Observation source;
  std::vector<Observation> follow_ups;  // spec order
  friend bool operator==(const FrameObservations&, const FrameObservations&) = default;
};

struct CellResult {
  std::int64_t frame_id = 0;
  std::string config_label;
  Observation sa_f;
  std::optional<double> ad;      // present iff sa_f and SA* are both available
  std::optional<double> ad_ref;  // AD of the reference config on this frame
  std::vector<UBRecord> ub;      // aligned with RunReport::thetas; empty if not evaluable
  std::optional<bool> mr_violation;

  bool evaluable() const { return !ub.empty(); }
};

struct FrameResult {
  std::int64_t frame_id = 0;
  std::optional<SteeringAngle> ground_truth;
  Observation sa_s;
  bool curved = false;
  std::vector<CellResult> cells;  // spec order
};

struct CurvedMask {
  std::vector<bool> curved;
  bool ground_truth_available = false;  // any frame carries ground truth
  std::size_t frames_without_ground_truth = 0;

  std::size_t curved_count() const;
  double curved_fraction() const;
};

/// Flags frames with |ground truth| > threshold. Frames without ground truth
/// count as straight.
CurvedMask mask_curved(const std::vector<std::optional<SteeringAngle>>& ground_truth,
                       double threshold = kCurvedThreshold);
CurvedMask mask_curved(const std::vector<SourceFrame>& corpus, double threshold = kCurvedThreshold);

struct RateCount {
  std::size_t hits = 0;
  std::size_t evaluable = 0;

  std::optional<double> rate() const {
    if (evaluable == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(evaluable);
  }
  friend bool operator==(const RateCount&, const RateCount&) = default;
};

struct ConfigAggregate {
  std::string label;
  bool reference = false;
  int lateral_offset_px = 0;
  std::vector<RateCount> ub;  // per theta
  RateCount violations;
  std::size_t errors = 0;          // straight-road cells the SUT failed on
  std::size_t excluded_curved = 0;  // cells dropped by the curved mask
  friend bool operator==(const ConfigAggregate&, const ConfigAggregate&) = default;
};

/// Unweighted mean of member config rates; undefined members are skipped.
struct Rollup {
  std::string name;
  std::vector<std::string> members;
  std::vector<std::optional<double>> ub_rate;  // per theta
  std::optional<double> violation_rate;
  friend bool operator==(const Rollup&, const Rollup&) = default;
};

struct Aggregates {
  std::vector<ConfigAggregate> configs;  // spec order
  std::optional<Rollup> left;
  std::optional<Rollup> right;
  Rollup smg;
  std::size_t frames_total = 0;
  std::size_t frames_curved = 0;
  friend bool operator==(const Aggregates&, const Aggregates&) = default;
};

/// Per-config rates over straight frames (all frames when include_curved),
/// side rollups over left/right offsets and the SMG rollup over all
/// non-reference configs.
Aggregates aggregate(const SMGSpec& spec, const std::vector<FrameResult>& frames, const std::vector<double>& thetas,
                     bool include_curved);

struct RunReport {
  SMGSpec spec;
  SutDescriptor sut;
  std::vector<double> thetas;
  double kappa = kDefaultKappa;
  std::uint64_t seed = 0;
  bool include_curved = false;
  double curved_threshold = kCurvedThreshold;
  bool ground_truth_reference = false;
  std::vector<FrameResult> frames;
  Aggregates aggregates;
  bool ground_truth_available = false;
  std::optional<ModelStats> stats;  // source SA vs ground truth
  std::string stats_note;
  std::vector<LatencyRecord> latencies;  // not part of the sealed payload
  std::size_t clamped = 0;

  std::vector<FrameObservations> observations() const;
  /// Failed SUT calls, source calls included.
  std::size_t error_cells() const;
};

struct RunSettings {
  std::vector<double> thetas = kDefaultThetas;
  double kappa = kDefaultKappa;
  std::uint64_t seed = 0;
  bool include_curved = false;
  double curved_threshold = kCurvedThreshold;
  // Use ground truth instead of the source output as SA*.
  bool ground_truth_reference = false;
};

/// Derives ADs, UB records, violations, masks, aggregates and statistics
/// from raw observations, then runs the self-consistency audit.
RunReport seal_report(const SMGSpec& spec, const SutDescriptor& sut, const RunSettings& settings,
                      std::vector<FrameObservations> observations);

/// Recounts every aggregate from the cells; throws Error on mismatch.
void audit_report(const RunReport& report);

struct RunOptions {
  RunSettings settings;
  TransformContext transform;  // sprites + seed for generation
  int lanes = 1;
  std::filesystem::path scratch_dir;
  // Completed frames are appended here; with `resume`, frames already in a
  // journal whose fingerprint matches are not re-executed.
  std::optional<std::filesystem::path> journal;
  bool resume = false;
  // Testing hook: throw RunInterrupted after this many newly executed frames.
  std::optional<std::size_t> stop_after_frames;
};

/// Runs one SMG over the corpus. Throws CorpusEmpty, SutUnreachable (before
/// any frame is executed) or RunInterrupted; SUT and transform failures are
/// recorded per cell.
RunReport run_testing(const SMGSpec& spec, const std::vector<SourceFrame>& corpus, const SutDescriptor& sut,
                      const ModelFactory& factory, const RunOptions& options);
RunReport run_testing(const SMGSpec& spec, const std::vector<SourceFrame>& corpus, const SutDescriptor& sut,
                      const RunOptions& options);

/// Identity of a run for journal matching: spec, SUT, settings, corpus pixels.
std::string run_fingerprint(const SMGSpec& spec, const SutDescriptor& sut, const RunSettings& settings,
                            const std::vector<SourceFrame>& corpus);

}  // namespace smart
