#include <doctest.h>

#include "singularguard/rl/env.hpp"

using namespace singularguard;
using namespace singularguard::rl;

namespace {

ReachEnv make_env(EnvConfig cfg = {}) {
  const auto m = KinematicModel::ur10();
  return ReachEnv(m, cfg, IkConfig::defaults(m));
}

}  // namespace

TEST_CASE("curriculum table") {
  const auto& s = curriculum_stages();
  CHECK(s[0].target_radius == 0.10);
  CHECK(s[0].success_threshold == 0.60);
  CHECK(s[1].target_radius == 0.15);
  CHECK(s[1].success_threshold == 0.70);
  CHECK(s[2].target_radius == 0.20);
  CHECK(s[2].success_threshold == 0.80);
  CHECK(s[3].full_workspace());
  CHECK(s[3].success_threshold == 0.85);
  CHECK_THROWS_AS(curriculum_stage(0), std::out_of_range);
  CHECK_THROWS_AS(curriculum_stage(5), std::out_of_range);
}

TEST_CASE("config validation") {
  EnvConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.reward.singularity = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.home[0] = 100.0;
  CHECK_THROWS_AS(make_env(cfg), std::invalid_argument);
}

TEST_CASE("stage targets stay within radius, are seeded and IK-feasible") {
  ReachEnv env = make_env();
  const auto m = KinematicModel::ur10();
  const IkConfig ik = IkConfig::defaults(m);
  for (int stage = 1; stage <= 3; ++stage) {
    Rng rng(stage);
    for (int n = 0; n < 30; ++n) {
      const VectorXd obs = env.reset(curriculum_stage(stage), rng);
      CHECK(obs.size() == kObservationSize);
      CHECK(obs.allFinite());
      CHECK((env.state().target - env.home_tcp()).norm() <= curriculum_stage(stage).target_radius + 1e-12);
      CHECK(solve_ik(m, env.state().target, ik));
    }
  }
  Rng rng(9);
  for (int n = 0; n < 20; ++n) {
    env.reset(curriculum_stage(4), rng);
    const double r = env.state().target.norm();
    CHECK(r >= env.config().workspace_inner_radius - 1e-12);
    CHECK(r <= env.config().workspace_outer_fraction * m.max_reach() + 1e-12);
  }
  Rng a(5), b(5);
  ReachEnv other = make_env();
  for (int n = 0; n < 10; ++n) {
    env.reset(curriculum_stage(1), a);
    other.reset(curriculum_stage(1), b);
    CHECK(env.state().target == other.state().target);
  }
}

TEST_CASE("zero action away from the target") {
  ReachEnv env = make_env();
  env.reset_with_target(env.home_tcp() + Vec3(0.08, 0.0, 0.0));
  const StepResult s = env.step(Vec6::Zero());
  CHECK(s.reward.r_success == 0.0);
  CHECK(s.reward.r_progress == 0.0);
  CHECK(s.reward.p_velocity == 0.0);
  CHECK(s.reward.r_distance == doctest::Approx(-0.08));
  CHECK_FALSE(s.done);
}

TEST_CASE("reaching the target pays the bonus and ends the episode") {
  ReachEnv env = make_env();
  env.reset_with_target(env.home_tcp() + Vec3(0.0, 0.0, 0.01));
  const StepResult s = env.step(Vec6::Zero());
  CHECK(s.info.success);
  CHECK(s.done);
  CHECK(s.reward.r_success == env.config().reward.success_bonus);
  CHECK_THROWS_AS(env.step(Vec6::Zero()), std::logic_error);
}

TEST_CASE("reward total is the signed sum bitwise; penalties non-negative; actions clamped") {
  ReachEnv env = make_env();
  Rng rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int ep = 0; ep < 5; ++ep) {
    env.reset(curriculum_stage(2), rng);
    for (int t = 0; t < env.config().t_max; ++t) {
      Vec6 a;
      for (int i = 0; i < 6; ++i) a[i] = u(rng);
      const JointConfig before = env.state().q;
      const StepResult s = env.step(a);
      const auto& r = s.reward;
      CHECK(r.total == r.r_distance + r.r_success + r.r_progress - r.p_singularity - r.p_velocity);
      CHECK(r.p_singularity >= 0.0);
      CHECK(r.p_velocity >= 0.0);
      CHECK((env.state().q.q - before.q).cwiseAbs().maxCoeff() <= env.config().v_max * env.config().dt + 1e-15);
      CHECK(env.state().metrics.mu == compute_metrics(env.model(), env.state().q).mu);
      CHECK(s.observation.allFinite());
      if (s.done) break;
    }
  }
}

TEST_CASE("episodes end the moment mu drops below the floor") {
  EnvConfig cfg;
  cfg.home = JointConfig{0.0, -1.5707963267948966, 0.25, -1.5707963267948966, -1.5707963267948966, 0.0};
  ReachEnv env = make_env(cfg);
  env.reset_with_target(env.home_tcp() + Vec3(0.5, 0.5, 0.5));
  // Drive the elbow straight.
  Vec6 a = Vec6::Zero();
  a[2] = -1.0;
  bool stopped = false;
  for (int t = 0; t < 20 && !stopped; ++t) {
    const StepResult s = env.step(a);
    if (s.info.mu < cfg.mu_terminate) {
      CHECK(s.done);
      CHECK(s.info.singular_stop);
      stopped = true;
    } else {
      CHECK_FALSE(s.info.singular_stop);
    }
  }
  CHECK(stopped);
}

TEST_CASE("timeout after t_max steps") {
  EnvConfig cfg;
  cfg.t_max = 3;
  ReachEnv env = make_env(cfg);
  env.reset_with_target(env.home_tcp() + Vec3(0.09, 0.0, 0.0));
  CHECK_FALSE(env.step(Vec6::Zero()).done);
  CHECK_FALSE(env.step(Vec6::Zero()).done);
  const StepResult s = env.step(Vec6::Zero());
  CHECK(s.done);
  CHECK(s.info.timeout);
}
