#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "singularguard/fuzzy.hpp"
#include "singularguard/ik.hpp"
#include "singularguard/kinematics.hpp"
#include "singularguard/metrics.hpp"
#include "singularguard/monitor.hpp"
#include "singularguard/rl/env.hpp"
#include "singularguard/rl/trainer.hpp"

namespace singularguard {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IkSettings {
  double position_tolerance = 1e-3;
  int max_iterations = 200;
  double damping = 0.01;
  double max_step = 0.5;
  IkRanking ranking = IkRanking::MaxManipulability;
};

struct AppConfig {
  KinematicModel model = KinematicModel::ur10();
  MetricThresholds thresholds;
  IkSettings ik;
  std::filesystem::path rules_path;
  std::shared_ptr<const FuzzyEngine> engine;
  rl::EnvConfig env;
  rl::TrainConfig train;
  MonitorConfig monitor;
  std::filesystem::path output_dir = ".";

  /// IK settings bound to this model, thresholds and rule base.
  IkConfig ik_config() const;
};

/// Builds and validates every block. The rule-base path resolves against
/// `base_dir`; output_dir stays relative to the working directory. Unknown keys anywhere raise ConfigError.
AppConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
AppConfig load_config(const std::filesystem::path& path);

/// --config if given, else $SINGULARGUARD_CONFIG, else the shipped default.
std::filesystem::path resolve_config_path(const std::optional<std::filesystem::path>& flag);

nlohmann::json config_to_json(const AppConfig& cfg);

}  // namespace singularguard
