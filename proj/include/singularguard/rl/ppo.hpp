#pragma once

#include <stdexcept>
#include <vector>

#include "singularguard/rl/env.hpp"
#include "singularguard/rl/network.hpp"

namespace singularguard::rl {

struct PpoConfig {
  double clip_ratio = 0.2;
  int epochs = 4;
  int minibatch_size = 64;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;
  double entropy_coef = 0.0;
  std::vector<int> hidden = {64, 64};
  double log_std_init = -0.5;
  double log_std_min = -3.0;
  double log_std_max = 0.0;

  void validate() const;
};

/// Diagonal Gaussian policy: bounded mean network plus a free log-std vector.
struct PolicyParams {
  Mlp mean_net;
  VectorXd log_std;

  VectorXd flat() const;
  void set_flat(const VectorXd& flat);
  bool finite() const;
};

struct ValueParams {
  Mlp net;

  bool finite() const { return net.params().allFinite(); }
};

/// Policy, critic and their optimiser state.
struct ActorCritic {
  PolicyParams policy;
  ValueParams value;
  Adam policy_opt;
  Adam value_opt;

  static ActorCritic create(int obs_size, int action_size, double action_bound,
                            const PpoConfig& cfg, Rng& rng);

  VectorXd mean_action(const VectorXd& obs) const;
  double value_of(const VectorXd& obs) const;
  /// Draws an action; returns it with its log-probability.
  std::pair<VectorXd, double> sample(const VectorXd& obs, Rng& rng) const;
  double log_prob(const VectorXd& obs, const VectorXd& action) const;
  void set_learning_rate(double lr);
};

double gaussian_log_prob(const VectorXd& action, const VectorXd& mean, const VectorXd& log_std);

struct Batch {
  std::vector<VectorXd> observations;
  std::vector<VectorXd> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return observations.size(); }
  void append(const Batch& other);
};

/// Generalised advantage estimation over one trajectory. `bootstrap` is
/// V(s_T) when the trajectory was cut off and 0 when it terminated.
void compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                 double bootstrap, double gamma, double lambda,
                 std::vector<double>& advantages, std::vector<double>& returns);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  /// Largest gradient norms seen, before and after clipping.
  double policy_grad_norm = 0.0;
  double value_grad_norm = 0.0;
  double policy_grad_norm_clipped = 0.0;
  double value_grad_norm_clipped = 0.0;
  double approx_kl = 0.0;
  int minibatches = 0;
};

class DivergedUpdate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Clipped-surrogate policy step and value regression over `epochs` shuffled
/// passes. Policy and value gradients are clipped to `max_grad_norm`
/// separately. If any parameter turns non-finite the model is restored, the
/// learning rate halved, and DivergedUpdate thrown.
UpdateStats ppo_update(ActorCritic& model, const Batch& batch, const PpoConfig& cfg, Rng& rng);

/// Losses and gradients for a set of samples, without stepping. Exposed for
/// gradient checking.
struct LossGrad {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  VectorXd policy_grad;
  VectorXd value_grad;
};
LossGrad ppo_loss_and_grad(const ActorCritic& model, const Batch& batch,
                           const std::vector<std::size_t>& indices, const PpoConfig& cfg);

}  // namespace singularguard::rl
