#include <doctest.h>

#include <numbers>
#include <numeric>

#include "singularguard/rl/ppo.hpp"

using namespace singularguard::rl;

namespace {

Batch random_batch(ActorCritic& model, Rng& rng, int n, bool zero_advantage = false) {
  Batch b;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < n; ++k) {
    VectorXd obs(4);
    for (int i = 0; i < 4; ++i) obs[i] = u(rng);
    auto [act, lp] = model.sample(obs, rng);
    b.observations.push_back(obs);
    b.actions.push_back(act);
    b.old_log_probs.push_back(lp);
    b.advantages.push_back(zero_advantage ? 0.0 : u(rng));
    b.returns.push_back(u(rng));
  }
  return b;
}

double full_loss(const ActorCritic& m, const Batch& b, const PpoConfig& cfg, double& value_loss) {
  std::vector<std::size_t> idx(b.size());
  std::iota(idx.begin(), idx.end(), 0);
  Batch normalized = b;
  double mean = 0.0, var = 0.0;
  for (double a : b.advantages) mean += a / b.size();
  for (double a : b.advantages) var += (a - mean) * (a - mean) / b.size();
  for (double& a : normalized.advantages) a = (a - mean) / (std::sqrt(var) + 1e-8);
  const LossGrad lg = ppo_loss_and_grad(m, normalized, idx, cfg);
  value_loss = lg.value_loss;
  return lg.policy_loss;
}

}  // namespace

TEST_CASE("config validation") {
  PpoConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.clip_ratio = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.hidden.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("Gaussian log-probability") {
  VectorXd a(1), m(1), s(1);
  a << 0.0;
  m << 0.0;
  s << 0.0;
  CHECK(gaussian_log_prob(a, m, s) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)));
  a << 1.0;
  s << std::log(2.0);
  CHECK(gaussian_log_prob(a, m, s) == doctest::Approx(-0.125 - std::log(2.0) - 0.5 * std::log(2 * std::numbers::pi)));
}

TEST_CASE("GAE") {
  std::vector<double> adv, ret;
  compute_gae({1.0, 1.0}, {0.0, 0.0}, 0.0, 1.0, 1.0, adv, ret);
  CHECK(adv[0] == doctest::Approx(2.0));
  CHECK(adv[1] == doctest::Approx(1.0));
  compute_gae({1.0}, {0.5}, 2.0, 0.9, 0.95, adv, ret);
  CHECK(adv[0] == doctest::Approx(1.0 + 0.9 * 2.0 - 0.5));
  CHECK(ret[0] == doctest::Approx(adv[0] + 0.5));
  // lambda = 0 reduces to one-step TD errors.
  compute_gae({1.0, 2.0, 3.0}, {0.1, 0.2, 0.3}, 0.4, 0.5, 0.0, adv, ret);
  CHECK(adv[0] == doctest::Approx(1.0 + 0.5 * 0.2 - 0.1));
  CHECK(adv[1] == doctest::Approx(2.0 + 0.5 * 0.3 - 0.2));
  CHECK(adv[2] == doctest::Approx(3.0 + 0.5 * 0.4 - 0.3));
}

TEST_CASE("repeated updates on a frozen batch descend") {
  PpoConfig cfg;
  cfg.hidden = {16, 16};
  Rng rng(1);
  ActorCritic model = ActorCritic::create(4, 2, 1.0, cfg, rng);
  const Batch batch = random_batch(model, rng, 128);
  double v0 = 0.0, v1 = 0.0, v2 = 0.0;
  const double p0 = full_loss(model, batch, cfg, v0);
  Rng a(7);
  const UpdateStats s1 = ppo_update(model, batch, cfg, a);
  const double p1 = full_loss(model, batch, cfg, v1);
  Rng b(7);
  const UpdateStats s2 = ppo_update(model, batch, cfg, b);
  const double p2 = full_loss(model, batch, cfg, v2);
  CHECK(s2.policy_loss <= s1.policy_loss);
  CHECK(p1 <= p0);
  CHECK(p2 <= p1);
  CHECK(v2 < v0);
  CHECK(s1.minibatches == cfg.epochs * 2);
}

TEST_CASE("clipped gradient norms respect the bound") {
  PpoConfig cfg;
  cfg.max_grad_norm = 0.05;
  Rng rng(2);
  ActorCritic model = ActorCritic::create(4, 2, 1.0, cfg, rng);
  Batch batch = random_batch(model, rng, 64);
  for (double& r : batch.returns) r *= 100.0;
  const UpdateStats s = ppo_update(model, batch, cfg, rng);
  CHECK(s.value_grad_norm > cfg.max_grad_norm);
  CHECK(s.policy_grad_norm_clipped <= cfg.max_grad_norm + 1e-12);
  CHECK(s.value_grad_norm_clipped <= cfg.max_grad_norm + 1e-12);
}

TEST_CASE("zero advantages leave the policy untouched") {
  PpoConfig cfg;
  Rng rng(3);
  ActorCritic model = ActorCritic::create(4, 2, 1.0, cfg, rng);
  const Batch batch = random_batch(model, rng, 32, true);
  const VectorXd before = model.policy.flat();
  const VectorXd value_before = model.value.net.params();
  ppo_update(model, batch, cfg, rng);
  CHECK(model.policy.flat() == before);
  CHECK(model.value.net.params() != value_before);
}

TEST_CASE("log-std stays within its bounds") {
  PpoConfig cfg;
  cfg.learning_rate = 0.5;
  Rng rng(4);
  ActorCritic model = ActorCritic::create(4, 2, 1.0, cfg, rng);
  for (int k = 0; k < 5; ++k) {
    const Batch batch = random_batch(model, rng, 32);
    ppo_update(model, batch, cfg, rng);
    CHECK(model.policy.log_std.minCoeff() >= cfg.log_std_min);
    CHECK(model.policy.log_std.maxCoeff() <= cfg.log_std_max);
  }
}

TEST_CASE("a diverging update is rolled back with a halved learning rate") {
  PpoConfig cfg;
  Rng rng(5);
  ActorCritic model = ActorCritic::create(4, 2, 1.0, cfg, rng);
  Batch batch = random_batch(model, rng, 16);
  batch.returns[0] = std::numeric_limits<double>::infinity();
  const VectorXd before = model.policy.flat();
  CHECK_THROWS_AS(ppo_update(model, batch, cfg, rng), DivergedUpdate);
  CHECK(model.policy.flat() == before);
  CHECK(model.policy_opt.lr == doctest::Approx(cfg.learning_rate / 2));
  CHECK_THROWS_AS(ppo_update(model, Batch{}, cfg, rng), std::invalid_argument);
}
