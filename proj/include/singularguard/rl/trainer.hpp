#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "singularguard/rl/env.hpp"
#include "singularguard/rl/ppo.hpp"

namespace singularguard::rl {

struct TrainConfig {
  int episodes = 2000;
  int update_period = 8;
  int buffer_capacity = 20;
  /// Window of the rolling success rate reported in the curves.
  int rolling_window = 20;
  int start_stage = 1;
  int max_consecutive_rollbacks = 3;
  std::uint64_t seed = 0;
  PpoConfig ppo;

  void validate() const;
};

struct EpisodeRecord {
  int episode = 0;
  int stage = 1;
  double reward = 0.0;
  bool success = false;
  bool singular_stop = false;
  int steps = 0;
  double final_distance = 0.0;
  double min_mu = 0.0;

  bool operator==(const EpisodeRecord&) const = default;
};

struct UpdateRecord {
  int update_index = 0;
  int episode = 0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double rolling_success = 0.0;
  int stage = 1;
  double learning_rate = 0.0;
  double policy_grad_norm = 0.0;
  double value_grad_norm = 0.0;
  bool rolled_back = false;

  bool operator==(const UpdateRecord&) const = default;
};

struct StageAdvance {
  int episode = 0;
  int from_stage = 1;
  int to_stage = 2;
  double buffer_mean = 0.0;

  bool operator==(const StageAdvance&) const = default;
};

struct TrainingLog {
  std::vector<EpisodeRecord> episodes;
  std::vector<UpdateRecord> updates;
  std::vector<StageAdvance> advances;
  /// Steps where mu fell below the termination floor but the episode went on.
  /// The hard-termination guard keeps this at zero.
  int unguarded_singular_steps = 0;
  int singular_terminations = 0;
  /// False if any parameter was non-finite after an accepted update.
  bool parameters_always_finite = true;
  int final_stage = 1;

  bool operator==(const TrainingLog&) const = default;
};

struct TrainResult {
  ActorCritic model;
  TrainingLog log;
};

/// Mean value loss over the first and last `window` accepted updates.
struct LossTrend {
  double initial = 0.0;
  double final = 0.0;
};
LossTrend value_loss_trend(const TrainingLog& log, int window = 10);

using EpisodeCallback = std::function<void(const EpisodeRecord&)>;

/// Curriculum PPO: one rollout per episode, success pushed into a bounded
/// buffer, a PPO update every `update_period` episodes, and a stage advance
/// once the buffer is full and its mean clears the stage threshold.
TrainResult train(ReachEnv& env, const TrainConfig& cfg, const EpisodeCallback& on_episode = {});

struct SuccessReport {
  int episodes = 0;
  double success_rate = 0.0;
  double mean_final_distance = 0.0;
  double min_mu = 0.0;
  int singular_terminations = 0;
};

/// Greedy (mean-action) rollouts on `stage`.
SuccessReport evaluate(const ActorCritic& model, ReachEnv& env, const CurriculumStage& stage,
                       int episodes, Rng& rng);

/// Rollouts with a uniformly random action each step.
SuccessReport evaluate_random(ReachEnv& env, const CurriculumStage& stage, int episodes, Rng& rng);

/// CSV with columns update_index, episode, policy_loss, value_loss,
/// rolling_success, stage. Throws std::runtime_error on I/O failure.
void export_curves(const TrainingLog& log, const std::filesystem::path& path);
std::string curves_csv(const TrainingLog& log);

/// Full log as JSON (schema "singularguard.training_log/1") and back.
nlohmann::json training_log_to_json(const TrainingLog& log);
TrainingLog training_log_from_json(const nlohmann::json& doc);

/// Text parameter file: header, then each tensor's name and shape followed
/// by its row-major values.
void save_params(const ActorCritic& model, const std::filesystem::path& path);
ActorCritic load_params(const std::filesystem::path& path);

}  // namespace singularguard::rl
