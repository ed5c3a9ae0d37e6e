#pragma once

// Angle differences, undesirable-behaviour metrics, the Heaviside verdict,
// the per-MG violation rule and corpus statistics.
//
// Scalar forms are templates over the floating type; the array forms accept
// any Eigen array expression and return lazy expressions.

#include "smart/core_types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <span>
#include <utility>

namespace smart {

struct ViolationParams {
  double kappa = 0.12;

  explicit ViolationParams(double k = 0.12) : kappa(k) {
    if (!(k >= 0.0)) throw InvalidValue("kappa must be >= 0");
  }
};

inline constexpr double kDefaultKappa = 0.12;
inline constexpr double kCurvedThreshold = 0.2;

template <std::floating_point Scalar>
constexpr Scalar angle_difference(Scalar sa_f, Scalar sa_s) {
  return sa_f - sa_s;
}

inline double angle_difference(SteeringAngle sa_f, SteeringAngle sa_s) {
  return angle_difference(sa_f.value(), sa_s.value());
}

// The 1/4 factor maps |ad - ad_ref| from [0, 4] onto [0, 1].
template <std::floating_point Scalar>
Scalar metric_unchange(Scalar ad, Scalar ad_ref) {
  return std::abs(ad - ad_ref) / Scalar(4);
}

template <std::floating_point Scalar>
Scalar metric_rightward(Scalar ad, Scalar ad_ref) {
  return ad < ad_ref ? std::abs(ad - ad_ref) / Scalar(4) : Scalar(0);
}

template <std::floating_point Scalar>
Scalar metric_leftward(Scalar ad, Scalar ad_ref) {
  return ad > ad_ref ? std::abs(ad - ad_ref) / Scalar(4) : Scalar(0);
}

template <std::floating_point Scalar>
Scalar metric_value(MetricKind kind, Scalar ad, Scalar ad_ref) {
  switch (kind) {
    case MetricKind::Unchange: return metric_unchange(ad, ad_ref);
    case MetricKind::Rightward: return metric_rightward(ad, ad_ref);
    case MetricKind::Leftward: return metric_leftward(ad, ad_ref);
  }
  return Scalar(0);
}

template <typename DerivedA, typename DerivedB>
auto metric_unchange(const Eigen::ArrayBase<DerivedA>& ad, const Eigen::ArrayBase<DerivedB>& ad_ref) {
  using S = typename DerivedA::Scalar;
  return (ad.derived() - ad_ref.derived()).abs() / S(4);
}

template <typename DerivedA, typename DerivedB>
auto metric_rightward(const Eigen::ArrayBase<DerivedA>& ad, const Eigen::ArrayBase<DerivedB>& ad_ref) {
  using S = typename DerivedA::Scalar;
  return (ad.derived() < ad_ref.derived())
      .select((ad.derived() - ad_ref.derived()).abs() / S(4), S(0));
}

template <typename DerivedA, typename DerivedB>
auto metric_leftward(const Eigen::ArrayBase<DerivedA>& ad, const Eigen::ArrayBase<DerivedB>& ad_ref) {
  using S = typename DerivedA::Scalar;
  return (ad.derived() > ad_ref.derived())
      .select((ad.derived() - ad_ref.derived()).abs() / S(4), S(0));
}

/// Heaviside verdict: strict, so m == theta is not undesirable.
template <typename Scalar>
constexpr bool heaviside(Scalar m, Scalar theta) {
  return m > theta;
}

UBRecord determine_ub(MetricKind kind, double ad, double ad_ref, double theta);

/// |sa_f - sa_s| > kappa.
bool mr_violated(SteeringAngle sa_s, SteeringAngle sa_f, const ViolationParams& params);

/// MAE, RMSE, Pearson correlation and population stdev of the errors over
/// (prediction, reference) pairs. Throws InsufficientData below two pairs.
ModelStats model_stats(const Eigen::Ref<const Eigen::ArrayXd>& prediction,
                       const Eigen::Ref<const Eigen::ArrayXd>& reference);
ModelStats model_stats(std::span<const std::pair<double, double>> pairs);

}  // namespace smart
