#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "singularguard/config.hpp"
#include "support.hpp"

using namespace singularguard;
using nlohmann::json;

namespace {

std::filesystem::path shipped() { return default_data_dir() / "default_config.json"; }

json shipped_doc() { return json::parse(std::ifstream(shipped())); }

AppConfig from(const json& doc) { return config_from_json(doc, default_data_dir()); }

}  // namespace

TEST_CASE("shipped config loads with the documented defaults") {
  const AppConfig cfg = load_config(shipped());
  CHECK(cfg.model.max_reach() == KinematicModel::kUr10MaxReach);
  CHECK(cfg.thresholds.mu_threshold == 0.05);
  CHECK(cfg.thresholds.kappa_threshold == 50.0);
  CHECK(cfg.ik.position_tolerance == 1e-3);
  REQUIRE(cfg.engine);
  CHECK(cfg.engine->rules().size() == 45);
  CHECK(cfg.train.episodes == 2000);
  CHECK(cfg.train.ppo.hidden == std::vector<int>{64, 64});
  CHECK(cfg.monitor.f_monitor == 10.0);
  CHECK(cfg.monitor.emergency.kappa_stop == 500.0);
  CHECK(cfg.monitor.metrics.mu_threshold == cfg.thresholds.mu_threshold);
  CHECK(cfg.output_dir == ".");
  const IkConfig ik = cfg.ik_config();
  CHECK(ik.initial_guesses.size() == 5);
  CHECK_NOTHROW(ik.validate());
}

TEST_CASE("round trip through JSON") {
  const AppConfig cfg = load_config(shipped());
  const json out = config_to_json(cfg);
  const AppConfig again = from(out);
  CHECK(config_to_json(again) == out);
  CHECK(out.at("schema") == "singularguard.config/1");
}

TEST_CASE("unknown keys are rejected at every level") {
  for (const char* pointer : {"/bogus", "/ik/bogus", "/rl/ppo/bogus", "/monitor/emergency/bogus", "/kinematics/bogus"}) {
    json doc = shipped_doc();
    doc[json::json_pointer(pointer)] = 1;
    INFO(pointer);
    CHECK_THROWS_AS(from(doc), ConfigError);
  }
}

TEST_CASE("bad values are rejected") {
  auto rejects = [](const char* pointer, const json& value) {
    json doc = shipped_doc();
    doc[json::json_pointer(pointer)] = value;
    INFO(pointer);
    CHECK_THROWS_AS(from(doc), ConfigError);
  };
  rejects("/schema", "other/1");
  rejects("/kinematics/model", "ur5");
  rejects("/thresholds/mu", -1.0);
  rejects("/thresholds/kappa", "fifty");
  rejects("/ik/ranking", "random");
  rejects("/ik/max_iterations", 0);
  rejects("/rl/env/dt", 0.0);
  rejects("/rl/env/home", json::array({0, 0, 0}));
  rejects("/rl/ppo/clip_ratio", 2.0);
  rejects("/rl/train/start_stage", 7);
  rejects("/monitor/f_monitor", 0.0);
  rejects("/monitor/emergency/mu_stop", 0.5);
  rejects("/fuzzy/rules", "missing_rules.json");
}

TEST_CASE("custom DH rows") {
  json doc = shipped_doc();
  json rows = json::array();
  for (const auto& r : KinematicModel::ur10_dh()) rows.push_back({{"a", r.a}, {"d", r.d}, {"alpha", r.alpha}, {"theta_offset", r.theta_offset}});
  doc["kinematics"] = {{"dh", rows}, {"limits", json::array()}, {"max_reach", KinematicModel::kUr10MaxReach}};
  for (int i = 0; i < 6; ++i) doc["kinematics"]["limits"].push_back({-3.0, 3.0});
  const AppConfig cfg = from(doc);
  CHECK(cfg.model.limits()[0].hi == 3.0);
  CHECK(forward_kinematics(cfg.model, JointConfig{}).position.isApprox(
      forward_kinematics(KinematicModel::ur10(), JointConfig{}).position));
}

TEST_CASE("config path resolution") {
  CHECK(resolve_config_path(std::filesystem::path("x.json")) == "x.json");
  ::setenv("SINGULARGUARD_CONFIG", "/tmp/from_env.json", 1);
  CHECK(resolve_config_path(std::nullopt) == "/tmp/from_env.json");
  ::unsetenv("SINGULARGUARD_CONFIG");
  CHECK(resolve_config_path(std::nullopt) == shipped());
}

TEST_CASE("missing or malformed files") {
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
  const auto path = std::filesystem::temp_directory_path() / ("sg_cfg_" + std::to_string(::getpid()) + ".json");
  std::ofstream(path) << "{ not json";
  CHECK_THROWS_AS(load_config(path), ConfigError);
  std::filesystem::remove(path);
}
