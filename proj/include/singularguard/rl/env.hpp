#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include <Eigen/Core>

#include "singularguard/ik.hpp"
#include "singularguard/kinematics.hpp"
#include "singularguard/metrics.hpp"

namespace singularguard::rl {

using Rng = std::mt19937_64;
using Eigen::VectorXd;

inline constexpr int kObservationSize = 12;
inline constexpr int kActionSize = 6;

struct CurriculumStage {
  int index = 1;
  /// Ball radius around the home TCP; infinity means the full workspace.
  double target_radius = 0.10;
  double success_threshold = 0.60;

  bool full_workspace() const { return !std::isfinite(target_radius); }
};

/// The four fixed stages: 0.10 m / 60 %, 0.15 m / 70 %, 0.20 m / 80 %,
/// full workspace / 85 %.
const std::array<CurriculumStage, 4>& curriculum_stages();
const CurriculumStage& curriculum_stage(int index);

struct RewardWeights {
  double distance = 1.0;       // per metre
  double success_bonus = 50.0;
  double progress = 10.0;      // per metre of improvement
  double mu_safe = 0.05;
  double singularity = 5.0;
  double velocity = 0.1;
};

struct EnvConfig {
  double dt = 0.05;
  double v_max = 1.0;
  int t_max = 100;
  double d_success = 0.05;
  /// Episodes end the moment manipulability drops below this.
  double mu_terminate = 0.005;
  RewardWeights reward;
  JointConfig home{0.0, -1.5707963267948966, 1.5707963267948966, -1.5707963267948966,
                   -1.5707963267948966, 0.0};
  double workspace_inner_radius = 0.3;
  double workspace_outer_fraction = 0.95;
  int max_rejections = 100;
  /// Length scale for the tanh-squashed target offset in the observation.
  double target_offset_scale = 0.2;

  void validate() const;
};

struct EnvState {
  JointConfig q;
  Vec3 target = Vec3::Zero();
  SingularityMetrics metrics;
  int step_index = 0;
  double prev_distance = 0.0;
};

/// Reward terms; `total` is always the signed sum of the parts.
struct RewardBreakdown {
  double r_distance = 0.0;
  double r_success = 0.0;
  double r_progress = 0.0;
  double p_singularity = 0.0;
  double p_velocity = 0.0;
  double total = 0.0;
};

double reward_total(const RewardBreakdown& r);

struct StepInfo {
  bool success = false;
  bool singular_stop = false;
  bool timeout = false;
  double distance = 0.0;
  double mu = 0.0;
};

struct StepResult {
  VectorXd observation;
  RewardBreakdown reward;
  bool done = false;
  StepInfo info;
};

class SamplingExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Position-reaching task over the kinematic model. Not shareable across
/// concurrent episodes.
class ReachEnv {
 public:
  ReachEnv(KinematicModel model, EnvConfig cfg, IkConfig ik);

  /// Home pose plus a feasible target drawn for `stage`.
  VectorXd reset(const CurriculumStage& stage, Rng& rng);
  /// Home pose with a caller-chosen target (no feasibility check).
  VectorXd reset_with_target(const Vec3& target);
  StepResult step(const Vec6& action);

  VectorXd observe() const;
  const EnvState& state() const { return state_; }
  const EnvConfig& config() const { return cfg_; }
  const KinematicModel& model() const { return model_; }
  Vec3 home_tcp() const { return home_tcp_; }
  double distance() const;
  /// Number of resampled targets in the last reset().
  int last_rejections() const { return last_rejections_; }

 private:
  Vec3 sample_candidate(const CurriculumStage& stage, Rng& rng) const;

  KinematicModel model_;
  EnvConfig cfg_;
  IkConfig ik_;
  Vec3 home_tcp_;
  EnvState state_;
  bool active_ = false;
  int last_rejections_ = 0;
};

}  // namespace singularguard::rl
