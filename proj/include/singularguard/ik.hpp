#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "singularguard/kinematics.hpp"
#include "singularguard/metrics.hpp"

namespace singularguard {

class FuzzyEngine;

enum class IkRanking {
  /// Keep the surviving solution with the largest manipulability.
  MaxManipulability,
  /// Keep the surviving solution with the best fuzzy safety score (qdot = 0).
  FuzzySafetyScore,
};

struct IkConfig {
  /// Exactly five starting configurations.
  std::vector<JointConfig> initial_guesses;
  double position_tolerance = 1e-3;
  int max_iterations = 200;
  double damping = 0.01;
  /// Largest joint update per iteration (rad).
  double max_step = 0.5;
  MetricThresholds thresholds;
  IkRanking ranking = IkRanking::MaxManipulability;
  /// Required for IkRanking::FuzzySafetyScore.
  const FuzzyEngine* fuzzy = nullptr;

  static IkConfig defaults(const KinematicModel& model);
  void validate() const;
};

struct IkSolution {
  JointConfig q;
  double mu = 0.0;
  double residual = 0.0;
  SingularityMetrics metrics;
  double safety_score = 0.0;
  int guess_index = -1;
};

enum class IkFailure { None, Unreachable, Unsafe };
std::string_view to_string(IkFailure f);

struct IkCandidate {
  int guess_index = -1;
  std::optional<JointConfig> q;
  double residual = 0.0;
  SingularityMetrics metrics;
  bool accepted = false;
};

struct IkResult {
  std::optional<IkSolution> solution;
  IkFailure failure = IkFailure::None;
  std::vector<IkCandidate> candidates;

  explicit operator bool() const { return solution.has_value(); }
};

/// Home pose plus two elbow-up and two elbow-down variants. Fixed values.
std::vector<JointConfig> default_guesses(const KinematicModel& model);

/// Damped Gauss-Newton on the position residual, projected onto the joint
/// limits after every step. nullopt if the residual stays above tolerance.
std::optional<JointConfig> solve_ik_single(const KinematicModel& model, const Vec3& target,
                                           const JointConfig& guess, const IkConfig& cfg);

/// Multi-start solve filtered by the three singularity thresholds.
IkResult solve_ik(const KinematicModel& model, const Vec3& target, const IkConfig& cfg);

}  // namespace singularguard
