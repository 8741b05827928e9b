#pragma once

#include "singularguard/kinematics.hpp"

namespace singularguard {

/// Six singular values, descending.
using SingularValues = Vec6;

struct MetricThresholds {
  double mu_threshold = 0.05;
  double kappa_threshold = 50.0;
  double sigma_threshold = 0.01;
  /// Below this smallest singular value the condition number saturates.
  double sigma_floor = 1e-9;
  double kappa_cap = 1e6;
};

struct SingularityMetrics {
  double mu = 0.0;
  double kappa = 1.0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
};

SingularValues singular_values(const Jacobian& j);

/// sqrt(det(J J^T)); a round-off negative determinant reads as zero.
double manipulability(const Jacobian& j);

/// sigma_max / sigma_min, or kappa_cap once sigma_min drops below sigma_floor.
double condition_number(const Jacobian& j, const MetricThresholds& t = {});

double min_singular_value(const Jacobian& j);

/// All three measures. Manipulability still comes from the determinant;
/// the SVD supplies the other two.
SingularityMetrics metrics_from_jacobian(const Jacobian& j,
                                         const MetricThresholds& t = {});

SingularityMetrics compute_metrics(const KinematicModel& model, const JointConfig& q,
                                   const MetricThresholds& t = {});

/// True when all three thresholds hold, boundaries inclusive.
bool passes_thresholds(const SingularityMetrics& m, const MetricThresholds& t);

}  // namespace singularguard
