#include "smart/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace smart {

SteeringAngle::SteeringAngle(double value) : value_(value) {
  if (!std::isfinite(value) || value < -1.0 || value > 1.0)
    throw InvalidValue("steering angle outside [-1, 1]: " + std::to_string(value));
}

SteeringAngle SteeringAngle::clamped(double value) {
  if (std::isnan(value)) throw InvalidValue("steering angle is NaN");
  return SteeringAngle(std::clamp(value, -1.0, 1.0));
}

void validate_corpus(const std::vector<SourceFrame>& corpus) {
  if (corpus.empty()) throw CorpusEmpty("corpus has no frames");
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& f = corpus[i];
    if (!f.image || f.image->empty())
      throw CorpusError("frame " + std::to_string(f.frame_id) + " has no image");
    if (i > 0) {
      if (f.frame_id <= corpus[i - 1].frame_id)
        throw CorpusError("frame ids must be strictly ascending (at index " + std::to_string(i) + ")");
      if (!f.image->same_size(*corpus[0].image))
        throw CorpusError("frame " + std::to_string(f.frame_id) + " differs in size from frame " +
                          std::to_string(corpus[0].frame_id));
    }
  }
}

std::string_view to_string(TransformKind k) {
  switch (k) {
    case TransformKind::ObjectInsert: return "object_insert";
    case TransformKind::ObjectInsertOncoming: return "object_insert_oncoming";
    case TransformKind::ObjectColorVariant: return "object_color_variant";
    case TransformKind::ObjectPlusSnow: return "object_plus_snow";
  }
  return "?";
}

std::string_view to_string(MetricKind k) {
  switch (k) {
    case MetricKind::Unchange: return "unchange";
    case MetricKind::Rightward: return "rightward";
    case MetricKind::Leftward: return "leftward";
  }
  return "?";
}

TransformKind parse_transform_kind(std::string_view s) {
  for (auto k : {TransformKind::ObjectInsert, TransformKind::ObjectInsertOncoming,
                 TransformKind::ObjectColorVariant, TransformKind::ObjectPlusSnow})
    if (to_string(k) == s) return k;
  throw InvalidValue("unknown transform kind '" + std::string(s) + "'");
}

MetricKind parse_metric_kind(std::string_view s) {
  for (auto k : {MetricKind::Unchange, MetricKind::Rightward, MetricKind::Leftward})
    if (to_string(k) == s) return k;
  throw InvalidValue("unknown metric kind '" + std::string(s) + "'");
}

void MGConfig::validate() const {
  if (label.empty()) throw InvalidSpec("config label must not be empty");
  if (sprite_id.empty()) throw InvalidSpec("config '" + label + "' has no sprite");
  const bool wants_snow = kind == TransformKind::ObjectPlusSnow;
  if (wants_snow != snow_intensity.has_value())
    throw InvalidSpec("config '" + label + "': snow_intensity must be set exactly for object_plus_snow");
  if (snow_intensity && !(*snow_intensity >= 0.0 && *snow_intensity <= 1.0))
    throw InvalidSpec("config '" + label + "': snow_intensity outside [0, 1]");
}

std::optional<std::size_t> SMGSpec::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < configs.size(); ++i)
    if (configs[i].label == label) return i;
  return std::nullopt;
}

void SMGSpec::validate() const {
  if (name.empty()) throw InvalidSpec("SMG name must not be empty");
  if (configs.empty()) throw InvalidSpec(name + ": configs must be non-empty");
  if (reference_index >= configs.size())
    throw InvalidSpec(name + ": reference_index " + std::to_string(reference_index) + " out of range");
  std::set<std::string> seen;
  for (const auto& c : configs) {
    c.validate();
    if (!seen.insert(c.label).second) throw InvalidSpec(name + ": duplicate config label '" + c.label + "'");
  }
}

AngleDifference::AngleDifference(double ad_, double ad_ref_) : ad(ad_), ad_ref(ad_ref_) {
  if (!(ad >= -2.0 && ad <= 2.0) || !(ad_ref >= -2.0 && ad_ref <= 2.0))
    throw InvalidValue("angle difference outside [-2, 2]");
}

UBRecord::UBRecord(MetricKind kind, double m_, double theta_)
    : metric_kind(kind), m(m_), theta(theta_), u(m_ > theta_) {
  if (!(m >= 0.0 && m <= 1.0)) throw InvalidValue("metric value outside [0, 1]: " + std::to_string(m));
  if (!(theta >= 0.0)) throw InvalidValue("theta must be >= 0");
}

double ModelStats::correlation() const {
  if (!corr) throw DegenerateVariance("correlation undefined: a series has zero variance");
  return *corr;
}

}  // namespace smart
