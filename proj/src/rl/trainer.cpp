#include "singularguard/rl/trainer.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace singularguard::rl {

namespace {

constexpr const char* kParamsMagic = "singularguard-params";
constexpr int kParamsVersion = 1;

double mean_of(const std::deque<bool>& d) {
  if (d.empty()) return 0.0;
  return static_cast<double>(std::count(d.begin(), d.end(), true)) / static_cast<double>(d.size());
}

void push_bounded(std::deque<bool>& d, bool value, int capacity) {
  d.push_back(value);
  while (static_cast<int>(d.size()) > capacity) d.pop_front();
}

struct Rollout {
  Batch batch;
  EpisodeRecord record;
};

Rollout run_episode(ActorCritic& model, ReachEnv& env, const CurriculumStage& stage,
                    const PpoConfig& ppo, Rng& rng, TrainingLog& log) {
  Rollout out;
  VectorXd obs = env.reset(stage, rng);
  std::vector<double> rewards, values;
  out.record.min_mu = env.state().metrics.mu;
  StepResult res;
  for (int t = 0; t < env.config().t_max; ++t) {
    auto [action, logp] = model.sample(obs, rng);
    values.push_back(model.value_of(obs));
    res = env.step(action);
    out.batch.observations.push_back(obs);
    out.batch.actions.push_back(action);
    out.batch.old_log_probs.push_back(logp);
    rewards.push_back(res.reward.total);
    out.record.reward += res.reward.total;
    out.record.min_mu = std::min(out.record.min_mu, res.info.mu);
    if (res.info.mu < env.config().mu_terminate && !res.done) ++log.unguarded_singular_steps;
    obs = res.observation;
    if (res.done) break;
  }
  const bool terminal = res.info.success || res.info.singular_stop;
  const double bootstrap = terminal ? 0.0 : model.value_of(obs);
  compute_gae(rewards, values, bootstrap, ppo.gamma, ppo.gae_lambda, out.batch.advantages,
              out.batch.returns);
  out.record.stage = stage.index;
  out.record.success = res.info.success;
  out.record.singular_stop = res.info.singular_stop;
  out.record.steps = static_cast<int>(rewards.size());
  out.record.final_distance = res.info.distance;
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (episodes < 0) throw std::invalid_argument("train.episodes must be non-negative");
  if (update_period < 1) throw std::invalid_argument("train.update_period must be at least 1");
  if (buffer_capacity < 1) throw std::invalid_argument("train.buffer_capacity must be at least 1");
  if (rolling_window < 1) throw std::invalid_argument("train.rolling_window must be at least 1");
  if (start_stage < 1 || start_stage > 4) throw std::invalid_argument("train.start_stage must be 1-4");
  if (max_consecutive_rollbacks < 1) throw std::invalid_argument("train.max_consecutive_rollbacks must be at least 1");
  ppo.validate();
}

TrainResult train(ReachEnv& env, const TrainConfig& cfg, const EpisodeCallback& on_episode) {
  cfg.validate();
  Rng rng(cfg.seed);
  TrainResult result{ActorCritic::create(kObservationSize, kActionSize, env.config().v_max, cfg.ppo, rng), {}};
  ActorCritic& model = result.model;
  TrainingLog& log = result.log;

  int stage = cfg.start_stage;
  std::deque<bool> buffer, rolling;
  Batch pending;
  int consecutive_rollbacks = 0;

  for (int e = 1; e <= cfg.episodes; ++e) {
    Rollout ro = run_episode(model, env, curriculum_stage(stage), cfg.ppo, rng, log);
    ro.record.episode = e;
    if (ro.record.singular_stop) ++log.singular_terminations;
    pending.append(ro.batch);
    push_bounded(buffer, ro.record.success, cfg.buffer_capacity);
    push_bounded(rolling, ro.record.success, cfg.rolling_window);
    log.episodes.push_back(ro.record);
    if (on_episode) on_episode(ro.record);

    if (e % cfg.update_period == 0) {
      UpdateRecord rec;
      rec.update_index = static_cast<int>(log.updates.size());
      rec.episode = e;
      rec.stage = stage;
      rec.rolling_success = mean_of(rolling);
      try {
        const UpdateStats stats = ppo_update(model, pending, cfg.ppo, rng);
        consecutive_rollbacks = 0;
        rec.policy_loss = stats.policy_loss;
        rec.value_loss = stats.value_loss;
        rec.policy_grad_norm = stats.policy_grad_norm_clipped;
        rec.value_grad_norm = stats.value_grad_norm_clipped;
      } catch (const DivergedUpdate&) {
        rec.rolled_back = true;
        if (++consecutive_rollbacks >= cfg.max_consecutive_rollbacks) throw;
      }
      rec.learning_rate = model.policy_opt.lr;
      if (!model.policy.finite() || !model.value.finite()) log.parameters_always_finite = false;
      log.updates.push_back(rec);
      pending = Batch{};
    }

    const auto& current = curriculum_stage(stage);
    if (static_cast<int>(buffer.size()) == cfg.buffer_capacity &&
        mean_of(buffer) >= current.success_threshold && stage < 4) {
      log.advances.push_back({e, stage, stage + 1, mean_of(buffer)});
      ++stage;
      buffer.clear();
    }
  }
  log.final_stage = stage;
  return result;
}

LossTrend value_loss_trend(const TrainingLog& log, int window) {
  std::vector<double> losses;
  for (const auto& u : log.updates) {
    if (!u.rolled_back) losses.push_back(u.value_loss);
  }
  if (losses.empty() || window < 1) throw std::invalid_argument("value_loss_trend needs accepted updates");
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(window), losses.size());
  LossTrend t;
  t.initial = std::accumulate(losses.begin(), losses.begin() + n, 0.0) / n;
  t.final = std::accumulate(losses.end() - n, losses.end(), 0.0) / n;
  return t;
}

namespace {

template <class Policy>
SuccessReport rollouts(ReachEnv& env, const CurriculumStage& stage, int episodes, Rng& rng,
                       Policy&& policy) {
  SuccessReport rep;
  rep.episodes = episodes;
  rep.min_mu = std::numeric_limits<double>::infinity();
  int successes = 0;
  double total_distance = 0.0;
  for (int e = 0; e < episodes; ++e) {
    VectorXd obs = env.reset(stage, rng);
    rep.min_mu = std::min(rep.min_mu, env.state().metrics.mu);
    StepResult res;
    for (int t = 0; t < env.config().t_max; ++t) {
      res = env.step(policy(obs));
      rep.min_mu = std::min(rep.min_mu, res.info.mu);
      obs = res.observation;
      if (res.done) break;
    }
    successes += res.info.success ? 1 : 0;
    rep.singular_terminations += res.info.singular_stop ? 1 : 0;
    total_distance += res.info.distance;
  }
  if (episodes > 0) {
    rep.success_rate = static_cast<double>(successes) / episodes;
    rep.mean_final_distance = total_distance / episodes;
  } else {
    rep.min_mu = 0.0;
  }
  return rep;
}

}  // namespace

SuccessReport evaluate(const ActorCritic& model, ReachEnv& env, const CurriculumStage& stage,
                       int episodes, Rng& rng) {
  return rollouts(env, stage, episodes, rng, [&](const VectorXd& obs) {
    return Vec6(model.mean_action(obs));
  });
}

SuccessReport evaluate_random(ReachEnv& env, const CurriculumStage& stage, int episodes, Rng& rng) {
  std::uniform_real_distribution<double> u(-env.config().v_max, env.config().v_max);
  return rollouts(env, stage, episodes, rng, [&](const VectorXd&) {
    Vec6 a;
    for (int j = 0; j < kActionSize; ++j) a[j] = u(rng);
    return a;
  });
}

std::string curves_csv(const TrainingLog& log) {
  std::ostringstream out;
  out << "# schema: singularguard.curves/1\n";
  out << "update_index,episode,policy_loss,value_loss,rolling_success,stage\n";
  for (const auto& u : log.updates) {
    out << u.update_index << ',' << u.episode << ',' << fmt(u.policy_loss) << ','
        << fmt(u.value_loss) << ',' << fmt(u.rolling_success) << ',' << u.stage << '\n';
  }
  return out.str();
}

void export_curves(const TrainingLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write curves to " + path.string());
  out << curves_csv(log);
  out.flush();
  if (!out) throw std::runtime_error("failed while writing " + path.string());
}

nlohmann::json training_log_to_json(const TrainingLog& log) {
  using nlohmann::json;
  json episodes = json::array(), updates = json::array(), advances = json::array();
  for (const auto& e : log.episodes) {
    episodes.push_back({{"episode", e.episode}, {"stage", e.stage}, {"reward", e.reward},
                        {"success", e.success}, {"singular_stop", e.singular_stop},
                        {"steps", e.steps}, {"final_distance", e.final_distance},
                        {"min_mu", e.min_mu}});
  }
  for (const auto& u : log.updates) {
    updates.push_back({{"update_index", u.update_index}, {"episode", u.episode},
                       {"policy_loss", u.policy_loss}, {"value_loss", u.value_loss},
                       {"rolling_success", u.rolling_success}, {"stage", u.stage},
                       {"learning_rate", u.learning_rate},
                       {"policy_grad_norm", u.policy_grad_norm},
                       {"value_grad_norm", u.value_grad_norm}, {"rolled_back", u.rolled_back}});
  }
  for (const auto& a : log.advances) {
    advances.push_back({{"episode", a.episode}, {"from_stage", a.from_stage},
                        {"to_stage", a.to_stage}, {"buffer_mean", a.buffer_mean}});
  }
  return {{"schema", "singularguard.training_log/1"},
          {"episodes", episodes},
          {"updates", updates},
          {"advances", advances},
          {"unguarded_singular_steps", log.unguarded_singular_steps},
          {"singular_terminations", log.singular_terminations},
          {"parameters_always_finite", log.parameters_always_finite},
          {"final_stage", log.final_stage}};
}

TrainingLog training_log_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("schema", "") != "singularguard.training_log/1") {
    throw std::runtime_error("not a singularguard.training_log/1 document");
  }
  TrainingLog log;
  try {
    for (const auto& e : doc.at("episodes")) {
      log.episodes.push_back({e.at("episode"), e.at("stage"), e.at("reward"), e.at("success"),
                              e.at("singular_stop"), e.at("steps"), e.at("final_distance"),
                              e.at("min_mu")});
    }
    for (const auto& u : doc.at("updates")) {
      log.updates.push_back({u.at("update_index"), u.at("episode"), u.at("policy_loss"),
                             u.at("value_loss"), u.at("rolling_success"), u.at("stage"),
                             u.at("learning_rate"), u.at("policy_grad_norm"),
                             u.at("value_grad_norm"), u.at("rolled_back")});
    }
    for (const auto& a : doc.at("advances")) {
      log.advances.push_back({a.at("episode"), a.at("from_stage"), a.at("to_stage"), a.at("buffer_mean")});
    }
    log.unguarded_singular_steps = doc.at("unguarded_singular_steps");
    log.singular_terminations = doc.at("singular_terminations");
    log.parameters_always_finite = doc.at("parameters_always_finite");
    log.final_stage = doc.at("final_stage");
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed training log: ") + e.what());
  }
  return log;
}

namespace {

void write_tensor(std::ostream& out, const std::string& name, const double* data, int rows, int cols) {
  out << "tensor " << name << ' ' << rows << ' ' << cols << '\n';
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out << (c ? " " : "") << fmt(data[r * cols + c]);
    out << '\n';
  }
}

void write_mlp(std::ostream& out, const std::string& prefix, const Mlp& net) {
  for (const auto& view : net.layout()) {
    write_tensor(out, prefix + view.name, net.params().data() + view.offset, view.rows, view.cols);
  }
}

void read_tensor(std::istream& in, const std::string& name, double* data, int rows, int cols) {
  std::string tag, got;
  int r = 0, c = 0;
  if (!(in >> tag >> got >> r >> c) || tag != "tensor") {
    throw std::runtime_error("params file: expected tensor " + name);
  }
  if (got != name || r != rows || c != cols) {
    throw std::runtime_error("params file: tensor " + got + " does not match expected " + name + " " +
                             std::to_string(rows) + "x" + std::to_string(cols));
  }
  for (int i = 0; i < rows * cols; ++i) {
    if (!(in >> data[i])) throw std::runtime_error("params file: truncated tensor " + name);
  }
}

void read_mlp(std::istream& in, const std::string& prefix, Mlp& net) {
  for (const auto& view : net.layout()) {
    read_tensor(in, prefix + view.name, net.params().data() + view.offset, view.rows, view.cols);
  }
}

}  // namespace

void save_params(const ActorCritic& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write params to " + path.string());
  const auto& sizes = model.policy.mean_net.sizes();
  out << kParamsMagic << ' ' << kParamsVersion << '\n';
  out << "obs_size " << sizes.front() << '\n';
  out << "action_size " << sizes.back() << '\n';
  out << "action_bound " << fmt(model.policy.mean_net.output_scale()) << '\n';
  out << "hidden";
  for (std::size_t i = 1; i + 1 < sizes.size(); ++i) out << ' ' << sizes[i];
  out << '\n';
  write_mlp(out, "policy.", model.policy.mean_net);
  write_tensor(out, "policy.log_std", model.policy.log_std.data(), 1,
               static_cast<int>(model.policy.log_std.size()));
  write_mlp(out, "value.", model.value.net);
  out << "end\n";
  if (!out) throw std::runtime_error("failed while writing " + path.string());
}

ActorCritic load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open params file " + path.string());
  std::string magic, key, line;
  int version = 0, obs = 0, act = 0;
  double bound = 0.0;
  if (!(in >> magic >> version) || magic != kParamsMagic) throw std::runtime_error("not a params file: " + path.string());
  if (version != kParamsVersion) throw std::runtime_error("unsupported params version " + std::to_string(version));
  if (!(in >> key >> obs) || key != "obs_size") throw std::runtime_error("params file: missing obs_size");
  if (!(in >> key >> act) || key != "action_size") throw std::runtime_error("params file: missing action_size");
  if (!(in >> key >> bound) || key != "action_bound") throw std::runtime_error("params file: missing action_bound");
  if (!(in >> key) || key != "hidden") throw std::runtime_error("params file: missing hidden");
  std::getline(in, line);
  std::istringstream hs(line);
  PpoConfig cfg;
  cfg.hidden.clear();
  for (int h; hs >> h;) cfg.hidden.push_back(h);
  Rng rng(0);
  ActorCritic model = ActorCritic::create(obs, act, bound, cfg, rng);
  read_mlp(in, "policy.", model.policy.mean_net);
  read_tensor(in, "policy.log_std", model.policy.log_std.data(), 1, act);
  read_mlp(in, "value.", model.value.net);
  if (!(in >> key) || key != "end") throw std::runtime_error("params file: missing end marker");
  return model;
}

}  // namespace singularguard::rl
