#pragma once

#include "smart/errors.hpp"
#include "smart/raster.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace smart {

/// Normalized steering command in [-1, 1]; positive is leftward
/// (anticlockwise), negative is rightward (clockwise).
class SteeringAngle {
 public:
  constexpr SteeringAngle() = default;
  explicit SteeringAngle(double value);

  /// Saturates finite out-of-band values to [-1, 1]. NaN is still rejected.
  static SteeringAngle clamped(double value);

  constexpr double value() const { return value_; }
  friend constexpr bool operator==(SteeringAngle, SteeringAngle) = default;

 private:
  double value_ = 0.0;
};

struct SourceFrame {
  std::int64_t frame_id = 0;
  std::shared_ptr<const RgbImage> image;
  std::optional<SteeringAngle> ground_truth;
};

/// Ascending frame ids, uniform image size, at least one frame.
void validate_corpus(const std::vector<SourceFrame>& corpus);

enum class TransformKind { ObjectInsert, ObjectInsertOncoming, ObjectColorVariant, ObjectPlusSnow };

/// Selects the undesirable-behaviour metric applied to a configuration.
enum class MetricKind { Unchange, Rightward, Leftward };

std::string_view to_string(TransformKind k);
std::string_view to_string(MetricKind k);
TransformKind parse_transform_kind(std::string_view s);
MetricKind parse_metric_kind(std::string_view s);

/// One follow-up transformation. Every kind inserts a sprite, so offset and
/// sprite are always populated; snow intensity only for ObjectPlusSnow.
struct MGConfig {
  TransformKind kind = TransformKind::ObjectInsert;
  int lateral_offset_px = 0;
  std::string sprite_id;
  std::optional<double> snow_intensity;
  std::string label;
  // Overrides SMGSpec::metric_kind for this configuration only.
  std::optional<MetricKind> metric;

  void validate() const;
  friend bool operator==(const MGConfig&, const MGConfig&) = default;
};

struct SMGSpec {
  std::string name;
  std::string description;
  std::vector<MGConfig> configs;
  std::size_t reference_index = 0;
  MetricKind metric_kind = MetricKind::Unchange;

  const MGConfig& reference() const { return configs.at(reference_index); }
  MetricKind metric_for(std::size_t config_index) const {
    return configs.at(config_index).metric.value_or(metric_kind);
  }
  std::optional<std::size_t> index_of(std::string_view label) const;

  /// Throws InvalidSpec naming the violated invariant.
  void validate() const;
  friend bool operator==(const SMGSpec&, const SMGSpec&) = default;
};

struct AngleDifference {
  double ad = 0.0;
  double ad_ref = 0.0;

  AngleDifference() = default;
  AngleDifference(double ad, double ad_ref);
};

struct UBRecord {
  MetricKind metric_kind = MetricKind::Unchange;
  double m = 0.0;
  double theta = 0.0;
  bool u = false;

  UBRecord() = default;
  /// Validates m in [0,1], theta >= 0 and derives u = (m > theta).
  UBRecord(MetricKind kind, double m, double theta);
  friend bool operator==(const UBRecord&, const UBRecord&) = default;
};

struct ModelStats {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> corr;  // nullopt when either series is constant
  double stdev = 0.0;
  std::size_t count = 0;

  /// Pearson coefficient; throws DegenerateVariance when undefined.
  double correlation() const;
};

}  // namespace smart
