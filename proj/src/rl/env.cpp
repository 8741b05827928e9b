#include "singularguard/rl/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace singularguard::rl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

const std::array<CurriculumStage, 4>& curriculum_stages() {
  static const std::array<CurriculumStage, 4> stages{{
      {1, 0.10, 0.60},
      {2, 0.15, 0.70},
      {3, 0.20, 0.80},
      {4, kInf, 0.85},
  }};
  return stages;
}

const CurriculumStage& curriculum_stage(int index) {
  if (index < 1 || index > 4) throw std::out_of_range("curriculum stage must be 1-4");
  return curriculum_stages()[index - 1];
}

void EnvConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("env.dt must be positive");
  if (!(v_max > 0.0)) throw std::invalid_argument("env.v_max must be positive");
  if (t_max < 1) throw std::invalid_argument("env.t_max must be at least 1");
  if (!(d_success > 0.0)) throw std::invalid_argument("env.d_success must be positive");
  if (!(reward.mu_safe > 0.0)) throw std::invalid_argument("reward.mu_safe must be positive");
  if (reward.singularity < 0.0 || reward.velocity < 0.0) {
    throw std::invalid_argument("penalty weights must be non-negative");
  }
  if (!(workspace_inner_radius >= 0.0) || !(workspace_outer_fraction > 0.0) ||
      workspace_outer_fraction > 1.0) {
    throw std::invalid_argument("workspace annulus is invalid");
  }
  if (max_rejections < 1) throw std::invalid_argument("env.max_rejections must be at least 1");
  if (!home.finite()) throw std::invalid_argument("env.home is not finite");
}

double reward_total(const RewardBreakdown& r) {
  return r.r_distance + r.r_success + r.r_progress - r.p_singularity - r.p_velocity;
}

ReachEnv::ReachEnv(KinematicModel model, EnvConfig cfg, IkConfig ik)
    : model_(std::move(model)), cfg_(std::move(cfg)), ik_(std::move(ik)) {
  cfg_.validate();
  ik_.validate();
  if (!model_.within_limits(cfg_.home)) throw std::invalid_argument("env.home violates joint limits");
  home_tcp_ = forward_kinematics(model_, cfg_.home).position;
  reset_with_target(home_tcp_);
  active_ = false;
}

Vec3 ReachEnv::sample_candidate(const CurriculumStage& stage, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec3 dir(normal(rng), normal(rng), normal(rng));
  while (dir.norm() < 1e-12) dir = Vec3(normal(rng), normal(rng), normal(rng));
  dir.normalize();
  if (!stage.full_workspace()) {
    const double r = stage.target_radius * std::cbrt(unit(rng));
    return home_tcp_ + r * dir;
  }
  // Uniform in the volume of the reachable annulus around the base.
  const double r0 = cfg_.workspace_inner_radius;
  const double r1 = cfg_.workspace_outer_fraction * model_.max_reach();
  const double u = unit(rng);
  const double r = std::cbrt(r0 * r0 * r0 + u * (r1 * r1 * r1 - r0 * r0 * r0));
  return r * dir;
}

VectorXd ReachEnv::reset(const CurriculumStage& stage, Rng& rng) {
  for (int attempt = 0; attempt <= cfg_.max_rejections; ++attempt) {
    const Vec3 candidate = sample_candidate(stage, rng);
    if (solve_ik(model_, candidate, ik_)) {
      last_rejections_ = attempt;
      return reset_with_target(candidate);
    }
  }
  throw SamplingExhausted("no feasible target for curriculum stage " +
                          std::to_string(stage.index) + " after " +
                          std::to_string(cfg_.max_rejections) + " rejections");
}

VectorXd ReachEnv::reset_with_target(const Vec3& target) {
  state_.q = cfg_.home;
  state_.target = target;
  state_.metrics = compute_metrics(model_, state_.q, ik_.thresholds);
  state_.step_index = 0;
  state_.prev_distance = distance();
  active_ = true;
  return observe();
}

double ReachEnv::distance() const {
  return (forward_kinematics(model_, state_.q).position - state_.target).norm();
}

VectorXd ReachEnv::observe() const {
  VectorXd obs(kObservationSize);
  const Vec3 tcp = forward_kinematics(model_, state_.q).position;
  for (int i = 0; i < kNumJoints; ++i) obs[i] = state_.q[i] / std::numbers::pi;
  // Direction to the target with its length squashed into [0, 1).
  const Vec3 offset = state_.target - tcp;
  const double len = offset.norm();
  const Vec3 squashed =
      len > 0.0 ? Vec3(offset * (std::tanh(len / cfg_.target_offset_scale) / len)) : Vec3::Zero();
  for (int i = 0; i < 3; ++i) obs[6 + i] = squashed[i];
  const auto& m = state_.metrics;
  obs[9] = 2.0 * m.mu / 0.3 - 1.0;
  obs[10] = (std::log10(std::max(m.kappa, 1.0)) - 2.0) / 2.0;
  obs[11] = 2.0 * m.sigma_min / 0.35 - 1.0;
  return obs;
}

StepResult ReachEnv::step(const Vec6& action) {
  if (!active_) throw std::logic_error("step() called on a finished episode; call reset()");
  const Vec6 a = action.cwiseMax(-cfg_.v_max).cwiseMin(cfg_.v_max);
  state_.q = clamp_to_limits(model_, JointConfig(state_.q.q + a * cfg_.dt));
  state_.metrics = compute_metrics(model_, state_.q, ik_.thresholds);
  ++state_.step_index;

  StepResult out;
  const double dist = distance();
  const auto& w = cfg_.reward;
  out.info.distance = dist;
  out.info.mu = state_.metrics.mu;
  out.info.success = dist < cfg_.d_success;
  out.info.singular_stop = state_.metrics.mu < cfg_.mu_terminate;
  out.info.timeout = state_.step_index >= cfg_.t_max;

  auto& r = out.reward;
  r.r_distance = -w.distance * dist;
  r.r_success = out.info.success ? w.success_bonus : 0.0;
  r.r_progress = w.progress * (state_.prev_distance - dist);
  r.p_singularity = w.singularity * std::max(0.0, w.mu_safe - state_.metrics.mu) / w.mu_safe;
  r.p_velocity = w.velocity * a.cwiseAbs().mean();
  r.total = reward_total(r);

  state_.prev_distance = dist;
  out.done = out.info.success || out.info.singular_stop || out.info.timeout;
  if (out.done) active_ = false;
  out.observation = observe();
  return out;
}

}  // namespace singularguard::rl
