#include "smart/metrics.hpp"

#include <algorithm>

namespace smart {

UBRecord determine_ub(MetricKind kind, double ad, double ad_ref, double theta) {
  AngleDifference checked(ad, ad_ref);
  return UBRecord(kind, metric_value(kind, checked.ad, checked.ad_ref), theta);
}

bool mr_violated(SteeringAngle sa_s, SteeringAngle sa_f, const ViolationParams& params) {
  return std::abs(angle_difference(sa_f, sa_s)) > params.kappa;
}

ModelStats model_stats(const Eigen::Ref<const Eigen::ArrayXd>& prediction,
                       const Eigen::Ref<const Eigen::ArrayXd>& reference) {
  if (prediction.size() != reference.size()) throw InvalidValue("prediction/reference length mismatch");
  const Eigen::Index n = prediction.size();
  if (n < 2) throw InsufficientData("model_stats needs at least two pairs");

  const Eigen::ArrayXd err = prediction - reference;
  ModelStats s;
  s.count = static_cast<std::size_t>(n);
  s.mae = err.abs().mean();
  s.rmse = std::sqrt(err.square().mean());
  s.stdev = std::sqrt((err - err.mean()).square().mean());

  const Eigen::ArrayXd dp = prediction - prediction.mean();
  const Eigen::ArrayXd dr = reference - reference.mean();
  const double sxx = dp.square().sum();
  const double syy = dr.square().sum();
  // Constant series are detected exactly; the centred sums can carry
  // rounding residue from the mean.
  const bool p_constant = prediction.maxCoeff() == prediction.minCoeff();
  const bool r_constant = reference.maxCoeff() == reference.minCoeff();
  if (!p_constant && !r_constant && sxx > 0.0 && syy > 0.0) s.corr = std::clamp((dp * dr).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
  return s;
}

ModelStats model_stats(std::span<const std::pair<double, double>> pairs) {
  Eigen::ArrayXd p(static_cast<Eigen::Index>(pairs.size()));
  Eigen::ArrayXd r(p.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    p(static_cast<Eigen::Index>(i)) = pairs[i].first;
    r(static_cast<Eigen::Index>(i)) = pairs[i].second;
  }
  return model_stats(p, r);
}

}  // namespace smart
