#include "smart/core_types.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace smart {
namespace {

TEST(SteeringAngle, RangeAndNan) {
  EXPECT_EQ(SteeringAngle(1.0).value(), 1.0);
  EXPECT_EQ(SteeringAngle(-1.0).value(), -1.0);
  EXPECT_THROW(SteeringAngle(1.0000001), InvalidValue);
  EXPECT_THROW(SteeringAngle(std::numeric_limits<double>::quiet_NaN()), InvalidValue);
  EXPECT_EQ(SteeringAngle::clamped(3.0).value(), 1.0);
  EXPECT_EQ(SteeringAngle::clamped(-3.0).value(), -1.0);
}

TEST(Enums, RoundTripThroughStrings) {
  for (auto k : {TransformKind::ObjectInsert, TransformKind::ObjectInsertOncoming, TransformKind::ObjectColorVariant,
                 TransformKind::ObjectPlusSnow})
    EXPECT_EQ(parse_transform_kind(to_string(k)), k);
  for (auto k : {MetricKind::Unchange, MetricKind::Rightward, MetricKind::Leftward})
    EXPECT_EQ(parse_metric_kind(to_string(k)), k);
  EXPECT_THROW(parse_metric_kind("sideways"), InvalidValue);
}

TEST(MGConfig, SnowIntensityRules) {
  MGConfig c{TransformKind::ObjectPlusSnow, 0, "rear-red", std::nullopt, "snow"};
  EXPECT_THROW(c.validate(), InvalidSpec);
  c.snow_intensity = 1.2;
  EXPECT_THROW(c.validate(), InvalidSpec);
  c.snow_intensity = 0.4;
  EXPECT_NO_THROW(c.validate());
  c.kind = TransformKind::ObjectInsert;
  EXPECT_THROW(c.validate(), InvalidSpec);
}

TEST(SMGSpec, InvariantsAreChecked) {
  SMGSpec s = test::bundled("SMG3");
  EXPECT_NO_THROW(s.validate());
  EXPECT_EQ(s.reference().label, "car-red");
  EXPECT_EQ(s.index_of("car-blue"), 1u);
  EXPECT_FALSE(s.index_of("car-green"));

  auto dup = s;
  dup.configs[2].label = "car-blue";
  EXPECT_THROW(dup.validate(), InvalidSpec);
  auto bad_ref = s;
  bad_ref.reference_index = 3;
  EXPECT_THROW(bad_ref.validate(), InvalidSpec);
  auto empty = s;
  empty.configs.clear();
  EXPECT_THROW(empty.validate(), InvalidSpec);
}

TEST(SMGSpec, PerConfigMetricOverride) {
  const auto& s = test::bundled("SMG1");
  EXPECT_EQ(s.metric_for(0), MetricKind::Leftward);
  EXPECT_EQ(s.metric_for(4), MetricKind::Unchange);
  EXPECT_EQ(s.metric_for(8), MetricKind::Rightward);
}

TEST(Corpus, Validation) {
  auto corpus = test::synthetic_corpus(3, 1);
  EXPECT_NO_THROW(validate_corpus(corpus));
  std::swap(corpus[0], corpus[1]);
  EXPECT_THROW(validate_corpus(corpus), CorpusError);
  EXPECT_THROW(validate_corpus({}), CorpusEmpty);

  auto mixed = test::synthetic_corpus(2, 1);
  mixed[1].image = std::make_shared<const RgbImage>(RgbImage(32, 24));
  EXPECT_THROW(validate_corpus(mixed), CorpusError);
}

TEST(Raster, LuminanceWeights) {
  RgbImage img(2, 1);
  img.set_pixel(0, 0, {255, 0, 0});
  img.set_pixel(1, 0, {0, 0, 255});
  const auto lum = luminance(img);
  EXPECT_NEAR(lum(0, 0), 0.299 * 255, 1e-9);
  EXPECT_NEAR(lum(0, 1), 0.114 * 255, 1e-9);
}

}  // namespace
}  // namespace smart
