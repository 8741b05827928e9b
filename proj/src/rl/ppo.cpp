#include "singularguard/rl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace singularguard::rl {

namespace {

const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace

void PpoConfig::validate() const {
  if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) throw std::invalid_argument("ppo.clip_ratio must lie in (0, 1)");
  if (epochs < 1) throw std::invalid_argument("ppo.epochs must be at least 1");
  if (minibatch_size < 1) throw std::invalid_argument("ppo.minibatch_size must be at least 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo.gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw std::invalid_argument("ppo.gae_lambda must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("ppo.learning_rate must be positive");
  if (!(max_grad_norm > 0.0)) throw std::invalid_argument("ppo.max_grad_norm must be positive");
  if (entropy_coef < 0.0) throw std::invalid_argument("ppo.entropy_coef must be non-negative");
  if (hidden.empty()) throw std::invalid_argument("ppo.hidden needs at least one layer");
  if (!(log_std_min < log_std_max)) throw std::invalid_argument("ppo log-std bounds are inverted");
}

VectorXd PolicyParams::flat() const {
  VectorXd out(mean_net.num_params() + log_std.size());
  out << mean_net.params(), log_std;
  return out;
}

void PolicyParams::set_flat(const VectorXd& flat) {
  const auto n = mean_net.num_params();
  mean_net.params() = flat.head(n);
  log_std = flat.tail(log_std.size());
}

bool PolicyParams::finite() const {
  return mean_net.params().allFinite() && log_std.allFinite();
}

ActorCritic ActorCritic::create(int obs_size, int action_size, double action_bound,
                                const PpoConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<int> policy_sizes{obs_size};
  policy_sizes.insert(policy_sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  std::vector<int> value_sizes = policy_sizes;
  policy_sizes.push_back(action_size);
  value_sizes.push_back(1);

  ActorCritic ac;
  ac.policy.mean_net = Mlp(policy_sizes, true, action_bound);
  ac.policy.mean_net.init(rng, 0.01);
  ac.policy.log_std = VectorXd::Constant(action_size, cfg.log_std_init);
  ac.value.net = Mlp(value_sizes, false);
  ac.value.net.init(rng, 1.0);
  ac.policy_opt.lr = cfg.learning_rate;
  ac.value_opt.lr = cfg.learning_rate;
  ac.policy_opt.reset(ac.policy.flat().size());
  ac.value_opt.reset(ac.value.net.num_params());
  return ac;
}

VectorXd ActorCritic::mean_action(const VectorXd& obs) const { return policy.mean_net.forward(obs); }

double ActorCritic::value_of(const VectorXd& obs) const { return value.net.forward(obs)[0]; }

double gaussian_log_prob(const VectorXd& action, const VectorXd& mean, const VectorXd& log_std) {
  double lp = 0.0;
  for (Eigen::Index j = 0; j < action.size(); ++j) {
    const double z = (action[j] - mean[j]) * std::exp(-log_std[j]);
    lp += -0.5 * z * z - log_std[j] - kLogSqrt2Pi;
  }
  return lp;
}

std::pair<VectorXd, double> ActorCritic::sample(const VectorXd& obs, Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  const VectorXd mean = mean_action(obs);
  VectorXd action(mean.size());
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    action[j] = mean[j] + std::exp(policy.log_std[j]) * normal(rng);
  }
  return {action, gaussian_log_prob(action, mean, policy.log_std)};
}

double ActorCritic::log_prob(const VectorXd& obs, const VectorXd& action) const {
  return gaussian_log_prob(action, mean_action(obs), policy.log_std);
}

void ActorCritic::set_learning_rate(double lr) {
  policy_opt.lr = lr;
  value_opt.lr = lr;
}

void Batch::append(const Batch& other) {
  observations.insert(observations.end(), other.observations.begin(), other.observations.end());
  actions.insert(actions.end(), other.actions.begin(), other.actions.end());
  old_log_probs.insert(old_log_probs.end(), other.old_log_probs.begin(), other.old_log_probs.end());
  advantages.insert(advantages.end(), other.advantages.begin(), other.advantages.end());
  returns.insert(returns.end(), other.returns.begin(), other.returns.end());
}

void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 double bootstrap, double gamma, double lambda,
                 std::vector<double>& advantages, std::vector<double>& returns) {
  const std::size_t n = rewards.size();
  advantages.assign(n, 0.0);
  returns.assign(n, 0.0);
  double next_value = bootstrap;
  double running = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double delta = rewards[k] + gamma * next_value - values[k];
    running = delta + gamma * lambda * running;
    advantages[k] = running;
    returns[k] = running + values[k];
    next_value = values[k];
  }
}

LossGrad ppo_loss_and_grad(const ActorCritic& model, const Batch& batch,
                           const std::vector<std::size_t>& indices, const PpoConfig& cfg) {
  LossGrad out;
  const auto& pnet = model.policy.mean_net;
  const auto& vnet = model.value.net;
  const VectorXd& log_std = model.policy.log_std;
  const Eigen::Index n_pol = pnet.num_params();
  out.policy_grad = VectorXd::Zero(n_pol + log_std.size());
  out.value_grad = VectorXd::Zero(vnet.num_params());
  VectorXd pgrad = VectorXd::Zero(n_pol);
  VectorXd lsgrad = VectorXd::Zero(log_std.size());

  const double inv_n = 1.0 / static_cast<double>(indices.size());
  const VectorXd inv_var = (-2.0 * log_std).array().exp();
  Mlp::Cache pcache, vcache;
  for (std::size_t idx : indices) {
    const VectorXd& obs = batch.observations[idx];
    const VectorXd& act = batch.actions[idx];
    const double adv = batch.advantages[idx];

    const VectorXd mean = pnet.forward(obs, &pcache);
    const double logp = gaussian_log_prob(act, mean, log_std);
    const double ratio = std::exp(logp - batch.old_log_probs[idx]);
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
    const double unclipped_obj = ratio * adv;
    const double clipped_obj = clipped * adv;
    out.policy_loss -= std::min(unclipped_obj, clipped_obj) * inv_n;

    // d(loss)/d(logp); zero when the clipped branch is the active minimum.
    const double dlogp = unclipped_obj <= clipped_obj ? -adv * ratio * inv_n : 0.0;
    if (dlogp != 0.0) {
      const VectorXd diff = act - mean;
      const VectorXd dmean = dlogp * diff.cwiseProduct(inv_var);
      pnet.backward(pcache, dmean, pgrad);
      lsgrad += dlogp * (diff.cwiseAbs2().cwiseProduct(inv_var).array() - 1.0).matrix();
    }

    const double v = vnet.forward(obs, &vcache)[0];
    const double err = v - batch.returns[idx];
    out.value_loss += err * err * inv_n;
    VectorXd dv(1);
    dv[0] = 2.0 * err * inv_n;
    vnet.backward(vcache, dv, out.value_grad);
  }
  if (cfg.entropy_coef > 0.0) {
    // Gaussian entropy is sum(log_std) + const; the loss subtracts it.
    const double entropy = log_std.sum() + log_std.size() * (0.5 + kLogSqrt2Pi);
    out.policy_loss -= cfg.entropy_coef * entropy;
    lsgrad.array() -= cfg.entropy_coef;
  }
  out.policy_grad << pgrad, lsgrad;
  return out;
}

UpdateStats ppo_update(ActorCritic& model, const Batch& batch, const PpoConfig& cfg, Rng& rng) {
  cfg.validate();
  if (batch.size() == 0) throw std::invalid_argument("ppo_update needs a non-empty batch");

  Batch normalized = batch;
  const double n = static_cast<double>(batch.size());
  const double mean = std::accumulate(batch.advantages.begin(), batch.advantages.end(), 0.0) / n;
  double var = 0.0;
  for (double a : batch.advantages) var += (a - mean) * (a - mean);
  const double std_dev = std::sqrt(var / n);
  for (double& a : normalized.advantages) a = (a - mean) / (std_dev + 1e-8);

  const ActorCritic backup = model;
  UpdateStats stats;
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.minibatch_size);
      const std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
      LossGrad lg = ppo_loss_and_grad(model, normalized, idx, cfg);
      stats.policy_loss += lg.policy_loss;
      stats.value_loss += lg.value_loss;
      ++stats.minibatches;

      stats.policy_grad_norm = std::max(stats.policy_grad_norm, clip_global_norm(lg.policy_grad, cfg.max_grad_norm));
      stats.value_grad_norm = std::max(stats.value_grad_norm, clip_global_norm(lg.value_grad, cfg.max_grad_norm));
      stats.policy_grad_norm_clipped = std::max(stats.policy_grad_norm_clipped, lg.policy_grad.norm());
      stats.value_grad_norm_clipped = std::max(stats.value_grad_norm_clipped, lg.value_grad.norm());

      VectorXd flat = model.policy.flat();
      model.policy_opt.step(flat, lg.policy_grad);
      model.policy.set_flat(flat);
      model.policy.log_std = model.policy.log_std.cwiseMax(cfg.log_std_min).cwiseMin(cfg.log_std_max);
      model.value_opt.step(model.value.net.params(), lg.value_grad);

      if (!model.policy.finite() || !model.value.finite() || !std::isfinite(lg.policy_loss) ||
          !std::isfinite(lg.value_loss)) {
        const double lr = backup.policy_opt.lr * 0.5;
        model = backup;
        model.set_learning_rate(lr);
        throw DivergedUpdate("PPO update produced non-finite values; rolled back, learning rate now " +
                             std::to_string(lr));
      }
    }
  }
  stats.policy_loss /= stats.minibatches;
  stats.value_loss /= stats.minibatches;

  double kl = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    kl += batch.old_log_probs[i] - model.log_prob(batch.observations[i], batch.actions[i]);
  }
  stats.approx_kl = kl / n;
  return stats;
}

}  // namespace singularguard::rl
