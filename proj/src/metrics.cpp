#include "singularguard/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace singularguard {

namespace {

double kappa_from(const SingularValues& s, const MetricThresholds& t) {
  const double lo = s[kNumJoints - 1];
  if (lo < t.sigma_floor) return t.kappa_cap;
  return std::min(s[0] / lo, t.kappa_cap);
}

}  // namespace

SingularValues singular_values(const Jacobian& j) {
  // Eigen returns the singular values sorted in decreasing order.
  Eigen::JacobiSVD<Mat6> svd(j);
  SingularValues s = svd.singularValues();
  return s.cwiseMax(0.0);
}

double manipulability(const Jacobian& j) {
  // J is square, so det(J J^T) = det(J)^2. Taking the determinant of J
  // itself avoids squaring its conditioning before the factorisation.
  const double det_j = j.partialPivLu().determinant();
  const double det_jjt = det_j * det_j;
  return det_jjt > 0.0 ? std::sqrt(det_jjt) : 0.0;
}

double condition_number(const Jacobian& j, const MetricThresholds& t) {
  return kappa_from(singular_values(j), t);
}

double min_singular_value(const Jacobian& j) {
  return singular_values(j)[kNumJoints - 1];
}

SingularityMetrics metrics_from_jacobian(const Jacobian& j, const MetricThresholds& t) {
  const SingularValues s = singular_values(j);
  return {manipulability(j), kappa_from(s, t), s[kNumJoints - 1], s[0]};
}

SingularityMetrics compute_metrics(const KinematicModel& model, const JointConfig& q,
                                   const MetricThresholds& t) {
  return metrics_from_jacobian(compute_jacobian(model, q), t);
}

bool passes_thresholds(const SingularityMetrics& m, const MetricThresholds& t) {
  return m.mu >= t.mu_threshold && m.kappa <= t.kappa_threshold &&
         m.sigma_min >= t.sigma_threshold;
}

}  // namespace singularguard
