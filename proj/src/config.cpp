#include "singularguard/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <string>

namespace singularguard {

using nlohmann::json;

namespace {

constexpr const char* kSchema = "singularguard.config/1";

class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(path_ + " must be a JSON object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  void get(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(key, "a number");
      out = v->get<double>();
    }
  }

  void get(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(key, "an integer");
      out = v->get<int>();
    }
  }

  void get(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }

  void get(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(key, "a string");
      out = v->get<std::string>();
    }
  }

  void get(const char* key, std::vector<int>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(key, "an array of integers");
      out.clear();
      for (const auto& x : *v) {
        if (!x.is_number_integer()) fail(key, "an array of integers");
        out.push_back(x.get<int>());
      }
    }
  }

  void get(const char* key, JointConfig& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != kNumJoints) fail(key, "an array of 6 numbers");
      for (int i = 0; i < kNumJoints; ++i) {
        if (!(*v)[i].is_number()) fail(key, "an array of 6 numbers");
        out[i] = (*v)[i].get<double>();
      }
    }
  }

  /// Nested section; an absent key reads as an empty object.
  Section sub(const char* key) {
    static const json empty = json::object();
    const json* v = find(key);
    return Section(v ? *v : empty, path_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key " + path_ + "." + key);
    }
  }

  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ConfigError(path_ + "." + key + " must be " + what);
  }

  const std::string& path() const { return path_; }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

KinematicModel read_kinematics(Section s) {
  std::string preset = "ur10";
  s.get("model", preset);
  const json* dh = s.find("dh");
  const json* limits = s.find("limits");
  const json* reach = s.find("max_reach");
  s.finish();
  if (!dh && !limits && !reach) {
    if (preset != "ur10") throw ConfigError("kinematics.model: unknown preset \"" + preset + "\"");
    return KinematicModel::ur10();
  }
  if (!dh || !limits || !reach) {
    throw ConfigError("kinematics: dh, limits and max_reach must be given together");
  }
  if (!dh->is_array() || dh->size() != kNumJoints) throw ConfigError("kinematics.dh must hold 6 rows");
  if (!limits->is_array() || limits->size() != kNumJoints) throw ConfigError("kinematics.limits must hold 6 rows");
  if (!reach->is_number()) throw ConfigError("kinematics.max_reach must be a number");
  std::array<DhRow, kNumJoints> rows{};
  std::array<JointLimit, kNumJoints> lims{};
  for (int i = 0; i < kNumJoints; ++i) {
    Section row((*dh)[i], "kinematics.dh[" + std::to_string(i) + "]");
    row.get("a", rows[i].a);
    row.get("d", rows[i].d);
    row.get("alpha", rows[i].alpha);
    row.get("theta_offset", rows[i].theta_offset);
    row.finish();
    const json& lim = (*limits)[i];
    if (!lim.is_array() || lim.size() != 2 || !lim[0].is_number() || !lim[1].is_number()) {
      throw ConfigError("kinematics.limits[" + std::to_string(i) + "] must be [lo, hi]");
    }
    lims[i] = {lim[0].get<double>(), lim[1].get<double>()};
  }
  try {
    return KinematicModel(rows, lims, reach->get<double>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("kinematics: ") + e.what());
  }
}

void read_thresholds(Section s, MetricThresholds& t) {
  s.get("mu", t.mu_threshold);
  s.get("kappa", t.kappa_threshold);
  s.get("sigma", t.sigma_threshold);
  s.get("sigma_floor", t.sigma_floor);
  s.get("kappa_cap", t.kappa_cap);
  s.finish();
  if (!(t.mu_threshold > 0.0 && t.kappa_threshold > 1.0 && t.sigma_threshold > 0.0 &&
        t.sigma_floor > 0.0 && t.kappa_cap > t.kappa_threshold)) {
    throw ConfigError("thresholds: mu, sigma, sigma_floor must be positive, kappa > 1 and kappa_cap > kappa");
  }
}

void read_ik(Section s, IkSettings& ik) {
  s.get("position_tolerance", ik.position_tolerance);
  s.get("max_iterations", ik.max_iterations);
  s.get("damping", ik.damping);
  s.get("max_step", ik.max_step);
  std::string ranking = ik.ranking == IkRanking::MaxManipulability ? "max_manipulability" : "fuzzy_safety_score";
  s.get("ranking", ranking);
  s.finish();
  if (ranking == "max_manipulability") {
    ik.ranking = IkRanking::MaxManipulability;
  } else if (ranking == "fuzzy_safety_score") {
    ik.ranking = IkRanking::FuzzySafetyScore;
  } else {
    throw ConfigError("ik.ranking must be max_manipulability or fuzzy_safety_score");
  }
}

void read_env(Section s, rl::EnvConfig& e) {
  s.get("dt", e.dt);
  s.get("v_max", e.v_max);
  s.get("t_max", e.t_max);
  s.get("d_success", e.d_success);
  s.get("mu_terminate", e.mu_terminate);
  s.get("home", e.home);
  s.get("workspace_inner_radius", e.workspace_inner_radius);
  s.get("workspace_outer_fraction", e.workspace_outer_fraction);
  s.get("max_rejections", e.max_rejections);
  s.get("target_offset_scale", e.target_offset_scale);
  s.finish();
}

void read_reward(Section s, rl::RewardWeights& w) {
  s.get("distance", w.distance);
  s.get("success_bonus", w.success_bonus);
  s.get("progress", w.progress);
  s.get("mu_safe", w.mu_safe);
  s.get("singularity", w.singularity);
  s.get("velocity", w.velocity);
  s.finish();
}

void read_ppo(Section s, rl::PpoConfig& p) {
  s.get("clip_ratio", p.clip_ratio);
  s.get("epochs", p.epochs);
  s.get("minibatch_size", p.minibatch_size);
  s.get("gamma", p.gamma);
  s.get("gae_lambda", p.gae_lambda);
  s.get("learning_rate", p.learning_rate);
  s.get("max_grad_norm", p.max_grad_norm);
  s.get("entropy_coef", p.entropy_coef);
  s.get("hidden", p.hidden);
  s.get("log_std_init", p.log_std_init);
  s.get("log_std_min", p.log_std_min);
  s.get("log_std_max", p.log_std_max);
  s.finish();
}

void read_train(Section s, rl::TrainConfig& t) {
  s.get("episodes", t.episodes);
  s.get("update_period", t.update_period);
  s.get("buffer_capacity", t.buffer_capacity);
  s.get("rolling_window", t.rolling_window);
  s.get("start_stage", t.start_stage);
  s.get("max_consecutive_rollbacks", t.max_consecutive_rollbacks);
  s.get("seed", t.seed);
  s.finish();
}

void read_monitor(Section s, MonitorConfig& m) {
  s.get("f_monitor", m.f_monitor);
  s.get("f_elevated", m.f_elevated);
  s.get("v_threshold", m.v_threshold);
  s.get("deescalate_after", m.deescalate_after);
  s.get("stale_intervals", m.stale_intervals);
  Section e = s.sub("emergency");
  auto& t = m.emergency;
  e.get("mu_stop", t.mu_stop);
  e.get("kappa_stop", t.kappa_stop);
  e.get("mu_critical", t.mu_critical);
  e.get("kappa_critical", t.kappa_critical);
  e.get("velocity_stop", t.velocity_stop);
  e.get("mu_warning", t.mu_warning);
  e.get("kappa_warning", t.kappa_warning);
  e.get("critical_velocity_scale", t.critical_velocity_scale);
  e.get("warning_velocity_scale", t.warning_velocity_scale);
  e.finish();
  s.finish();
}

template <class F>
void checked(const char* block, F&& validate) {
  try {
    validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string(block) + ": " + e.what());
  }
}

}  // namespace

IkConfig AppConfig::ik_config() const {
  IkConfig cfg = IkConfig::defaults(model);
  cfg.position_tolerance = ik.position_tolerance;
  cfg.max_iterations = ik.max_iterations;
  cfg.damping = ik.damping;
  cfg.max_step = ik.max_step;
  cfg.thresholds = thresholds;
  cfg.ranking = ik.ranking;
  cfg.fuzzy = engine.get();
  return cfg;
}

AppConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  Section root(doc, "config");
  AppConfig cfg;
  std::string schema = kSchema;
  root.get("schema", schema);
  if (schema != kSchema) throw ConfigError("config.schema: expected " + std::string(kSchema) + ", got " + schema);

  cfg.model = read_kinematics(root.sub("kinematics"));
  read_thresholds(root.sub("thresholds"), cfg.thresholds);
  read_ik(root.sub("ik"), cfg.ik);

  Section fuzzy = root.sub("fuzzy");
  std::string rules;
  fuzzy.get("rules", rules);
  fuzzy.finish();
  cfg.rules_path = rules.empty() ? default_data_dir() / "fuzzy_rules.json" : base_dir / rules;

  Section rl = root.sub("rl");
  read_env(rl.sub("env"), cfg.env);
  read_reward(rl.sub("reward"), cfg.env.reward);
  read_ppo(rl.sub("ppo"), cfg.train.ppo);
  read_train(rl.sub("train"), cfg.train);
  rl.finish();

  read_monitor(root.sub("monitor"), cfg.monitor);
  cfg.monitor.metrics = cfg.thresholds;

  std::string out = cfg.output_dir.string();
  root.get("output_dir", out);
  cfg.output_dir = out;
  root.finish();

  checked("fuzzy", [&] {
    try {
      cfg.engine = std::make_shared<const FuzzyEngine>(FuzzyEngine::load(cfg.rules_path));
    } catch (const RuleBaseError& e) {
      std::string msg = "rule base " + cfg.rules_path.string() + " is invalid:";
      for (const auto& v : e.report().violations) msg += "\n  " + v;
      throw ConfigError(msg);
    }
  });
  checked("ik", [&] { cfg.ik_config().validate(); });
  checked("rl.env", [&] { cfg.env.validate(); });
  checked("rl.train", [&] { cfg.train.validate(); });
  checked("monitor", [&] { cfg.monitor.validate(); });
  if (!cfg.model.within_limits(cfg.env.home)) throw ConfigError("rl.env.home violates the joint limits");
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc, path.parent_path());
}

std::filesystem::path resolve_config_path(const std::optional<std::filesystem::path>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SINGULARGUARD_CONFIG"); env && *env) return env;
  return default_data_dir() / "default_config.json";
}

json config_to_json(const AppConfig& cfg) {
  json dh = json::array();
  json limits = json::array();
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& r = cfg.model.dh_rows()[i];
    dh.push_back({{"a", r.a}, {"d", r.d}, {"alpha", r.alpha}, {"theta_offset", r.theta_offset}});
    limits.push_back({cfg.model.limits()[i].lo, cfg.model.limits()[i].hi});
  }
  const auto& e = cfg.env;
  const auto& w = e.reward;
  const auto& p = cfg.train.ppo;
  const auto& t = cfg.train;
  const auto& m = cfg.monitor;
  const auto& em = m.emergency;
  return {
      {"schema", kSchema},
      {"kinematics", {{"dh", dh}, {"limits", limits}, {"max_reach", cfg.model.max_reach()}}},
      {"thresholds",
       {{"mu", cfg.thresholds.mu_threshold},
        {"kappa", cfg.thresholds.kappa_threshold},
        {"sigma", cfg.thresholds.sigma_threshold},
        {"sigma_floor", cfg.thresholds.sigma_floor},
        {"kappa_cap", cfg.thresholds.kappa_cap}}},
      {"ik",
       {{"position_tolerance", cfg.ik.position_tolerance},
        {"max_iterations", cfg.ik.max_iterations},
        {"damping", cfg.ik.damping},
        {"max_step", cfg.ik.max_step},
        {"ranking", cfg.ik.ranking == IkRanking::MaxManipulability ? "max_manipulability"
                                                                   : "fuzzy_safety_score"}}},
      {"fuzzy", {{"rules", cfg.rules_path.string()}}},
      {"rl",
       {{"env",
         {{"dt", e.dt},
          {"v_max", e.v_max},
          {"t_max", e.t_max},
          {"d_success", e.d_success},
          {"mu_terminate", e.mu_terminate},
          {"home", std::vector<double>(e.home.q.data(), e.home.q.data() + kNumJoints)},
          {"workspace_inner_radius", e.workspace_inner_radius},
          {"workspace_outer_fraction", e.workspace_outer_fraction},
          {"max_rejections", e.max_rejections},
          {"target_offset_scale", e.target_offset_scale}}},
        {"reward",
         {{"distance", w.distance},
          {"success_bonus", w.success_bonus},
          {"progress", w.progress},
          {"mu_safe", w.mu_safe},
          {"singularity", w.singularity},
          {"velocity", w.velocity}}},
        {"ppo",
         {{"clip_ratio", p.clip_ratio},
          {"epochs", p.epochs},
          {"minibatch_size", p.minibatch_size},
          {"gamma", p.gamma},
          {"gae_lambda", p.gae_lambda},
          {"learning_rate", p.learning_rate},
          {"max_grad_norm", p.max_grad_norm},
          {"entropy_coef", p.entropy_coef},
          {"hidden", p.hidden},
          {"log_std_init", p.log_std_init},
          {"log_std_min", p.log_std_min},
          {"log_std_max", p.log_std_max}}},
        {"train",
         {{"episodes", t.episodes},
          {"update_period", t.update_period},
          {"buffer_capacity", t.buffer_capacity},
          {"rolling_window", t.rolling_window},
          {"start_stage", t.start_stage},
          {"max_consecutive_rollbacks", t.max_consecutive_rollbacks},
          {"seed", t.seed}}}}},
      {"monitor",
       {{"f_monitor", m.f_monitor},
        {"f_elevated", m.f_elevated},
        {"v_threshold", m.v_threshold},
        {"deescalate_after", m.deescalate_after},
        {"stale_intervals", m.stale_intervals},
        {"emergency",
         {{"mu_stop", em.mu_stop},
          {"kappa_stop", em.kappa_stop},
          {"mu_critical", em.mu_critical},
          {"kappa_critical", em.kappa_critical},
          {"velocity_stop", em.velocity_stop},
          {"mu_warning", em.mu_warning},
          {"kappa_warning", em.kappa_warning},
          {"critical_velocity_scale", em.critical_velocity_scale},
          {"warning_velocity_scale", em.warning_velocity_scale}}}}},
      {"output_dir", cfg.output_dir.string()},
  };
}

}  // namespace singularguard
