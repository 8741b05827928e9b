#include "singularguard/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "singularguard/config.hpp"
#include "singularguard/ik.hpp"
#include "singularguard/monitor.hpp"
#include "singularguard/rl/trainer.hpp"
#include "singularguard/scan.hpp"
#include "singularguard/service.hpp"
#include "singularguard/wire.hpp"

namespace singularguard::cli {

using json = Record;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(std::isfinite(v[i]) ? json(v[i]) : json(nullptr));
  return out;
}

json metrics_json(const SingularityMetrics& m) {
  return {{"mu", m.mu}, {"kappa", m.kappa}, {"sigma_min", m.sigma_min}};
}

Vec6 six(const std::vector<double>& v, const char* flag) {
  if (v.size() != kNumJoints) throw UsageError(std::string(flag) + " needs 6 comma-separated values");
  return Vec6(v.data());
}

struct Context {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
  AppConfig cfg;

  void emit(const json& record) const {
    out << to_line(record) << '\n';
    out.flush();
  }
};

struct SolveArgs {
  std::vector<double> target;
  std::string ranking;
};

int cmd_solve(Context& ctx, const SolveArgs& a) {
  if (a.target.size() != 3) throw UsageError("--target needs x,y,z");
  IkConfig ik = ctx.cfg.ik_config();
  if (a.ranking == "fuzzy_safety_score") {
    ik.ranking = IkRanking::FuzzySafetyScore;
  } else if (a.ranking == "max_manipulability") {
    ik.ranking = IkRanking::MaxManipulability;
  } else if (!a.ranking.empty()) {
    throw UsageError("--ranking must be max_manipulability or fuzzy_safety_score");
  }
  const Vec3 target(a.target[0], a.target[1], a.target[2]);
  const IkResult res = solve_ik(ctx.cfg.model, target, ik);
  json candidates = json::array();
  for (const auto& c : res.candidates) {
    json item = {{"guess_index", c.guess_index}, {"converged", c.q.has_value()}, {"accepted", c.accepted}};
    if (c.q) {
      item["residual"] = c.residual;
      item["mu"] = c.metrics.mu;
    }
    candidates.push_back(item);
  }
  json rec = {{"command", "solve-ik"}, {"target", vec(target)}};
  if (!res) {
    rec["status"] = "null";
    rec["reason"] = to_string(res.failure);
    rec["candidates"] = candidates;
    ctx.emit(rec);
    return kExitDomain;
  }
  const IkSolution& s = *res.solution;
  rec["status"] = "ok";
  rec["q"] = vec(s.q.q);
  rec["tcp"] = vec(forward_kinematics(ctx.cfg.model, s.q).position);
  rec.update(metrics_json(s.metrics));
  rec["residual"] = s.residual;
  rec["guess_index"] = s.guess_index;
  rec["safety_score"] = s.safety_score;
  rec["candidates"] = candidates;
  ctx.emit(rec);
  return kExitOk;
}

struct AssessArgs {
  std::optional<double> mu;
  std::optional<double> kappa;
  std::vector<double> q;
  std::vector<double> qdot;
};

int cmd_assess(Context& ctx, const AssessArgs& a) {
  const bool from_metrics = a.mu || a.kappa;
  if (from_metrics == !a.q.empty()) throw UsageError("give either --mu and --kappa, or --q");
  const JointVelocities qdot(a.qdot.empty() ? Vec6::Zero() : six(a.qdot, "--qdot"));
  SingularityMetrics m;
  json rec = {{"command", "assess"}};
  if (from_metrics) {
    if (!a.mu || !a.kappa) throw UsageError("--mu and --kappa go together");
    if (!(*a.mu >= 0.0) || !(*a.kappa >= 1.0) || !std::isfinite(*a.mu) || !std::isfinite(*a.kappa)) {
      throw UsageError("--mu must be >= 0 and --kappa >= 1");
    }
    m.mu = *a.mu;
    m.kappa = *a.kappa;
    rec["mu"] = m.mu;
    rec["kappa"] = m.kappa;
  } else {
    const JointConfig q(six(a.q, "--q"));
    m = compute_metrics(ctx.cfg.model, q, ctx.cfg.thresholds);
    rec["q"] = vec(q.q);
    rec["tcp"] = vec(forward_kinematics(ctx.cfg.model, q).position);
    rec.update(metrics_json(m));
  }
  if (!qdot.finite()) throw UsageError("--qdot must be finite");
  const SafetyAssessment sa = ctx.cfg.engine->assess_inputs(m.mu, m.kappa, mean_joint_speed(qdot));
  const EmergencyDecision d = emergency_decision(m.mu, m.kappa, qdot, ctx.cfg.monitor);
  json act = json::object();
  for (int i = 0; i < kNumLevels; ++i) act[std::string(to_string(static_cast<SafetyLevel>(i)))] = sa.activations[i];
  rec["v_bar"] = sa.v_bar;
  rec["safety_level"] = to_string(sa.classification);
  rec["safety_score"] = sa.safety_score;
  rec["activations"] = act;
  rec["action"] = to_string(d.action);
  if (d.velocity_scale) rec["velocity_scale"] = *d.velocity_scale;
  if (d.monitor_hz) rec["monitor_hz"] = *d.monitor_hz;
  ctx.emit(rec);
  return kExitOk;
}

struct TrainArgs {
  std::optional<int> episodes;
  std::optional<int> stage;
  std::string out_dir;
  bool verbose = false;
};

int cmd_train(Context& ctx, const TrainArgs& a) {
  rl::TrainConfig tc = ctx.cfg.train;
  if (a.episodes) tc.episodes = *a.episodes;
  if (a.stage) tc.start_stage = *a.stage;
  try {
    tc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const std::filesystem::path dir = a.out_dir.empty() ? ctx.cfg.output_dir : std::filesystem::path(a.out_dir);
  std::filesystem::create_directories(dir);
  rl::ReachEnv env(ctx.cfg.model, ctx.cfg.env, ctx.cfg.ik_config());
  rl::EpisodeCallback on_episode;
  if (a.verbose) {
    on_episode = [&](const rl::EpisodeRecord& e) {
      ctx.emit({{"type", "episode"}, {"episode", e.episode}, {"stage", e.stage},
                {"reward", e.reward}, {"success", e.success}, {"singular_stop", e.singular_stop},
                {"steps", e.steps}, {"final_distance", e.final_distance}, {"min_mu", e.min_mu}});
    };
  }
  const auto t0 = std::chrono::steady_clock::now();
  const rl::TrainResult result = rl::train(env, tc, on_episode);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& log = result.log;

  const auto params = dir / "params.txt";
  const auto curves = dir / "curves.csv";
  const auto log_path = dir / "training_log.json";
  rl::save_params(result.model, params);
  rl::export_curves(log, curves);
  {
    std::ofstream f(log_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + log_path.string());
    f << rl::training_log_to_json(log).dump() << '\n';
  }

  double best_rolling = 0.0;
  for (const auto& u : log.updates) best_rolling = std::max(best_rolling, u.rolling_success);
  json advances = json::array();
  for (const auto& adv : log.advances) {
    advances.push_back({{"episode", adv.episode}, {"from", adv.from_stage}, {"to", adv.to_stage}});
  }
  json rec = {{"command", "train"},
              {"type", "summary"},
              {"seed", tc.seed},
              {"episodes", log.episodes.size()},
              {"updates", log.updates.size()},
              {"final_stage", log.final_stage},
              {"advances", advances},
              {"max_rolling_success", best_rolling},
              {"parameters_always_finite", log.parameters_always_finite},
              {"unguarded_singular_steps", log.unguarded_singular_steps},
              {"singular_terminations", log.singular_terminations},
              {"seconds", seconds},
              {"params", params.string()},
              {"curves", curves.string()},
              {"log", log_path.string()}};
  if (!log.updates.empty()) {
    const rl::LossTrend trend = rl::value_loss_trend(log);
    rec["initial_value_loss"] = trend.initial;
    rec["final_value_loss"] = trend.final;
  }
  ctx.emit(rec);
  return kExitOk;
}

struct EvalArgs {
  std::string params;
  bool random = false;
  int stage = 1;
  int episodes = 50;
};

int cmd_eval(Context& ctx, const EvalArgs& a) {
  if (a.random == !a.params.empty()) throw UsageError("give either --params FILE or --random");
  if (a.stage < 1 || a.stage > 4) throw UsageError("--stage must be 1-4");
  if (a.episodes < 1) throw UsageError("--episodes must be positive");
  rl::ReachEnv env(ctx.cfg.model, ctx.cfg.env, ctx.cfg.ik_config());
  rl::Rng rng(ctx.cfg.train.seed);
  const auto& stage = rl::curriculum_stage(a.stage);
  rl::SuccessReport rep;
  if (a.random) {
    rep = rl::evaluate_random(env, stage, a.episodes, rng);
  } else {
    const rl::ActorCritic model = [&] {
      try {
        return rl::load_params(a.params);
      } catch (const std::runtime_error& e) {
        throw UsageError(e.what());
      }
    }();
    rep = rl::evaluate(model, env, stage, a.episodes, rng);
  }
  ctx.emit({{"command", "eval"},
            {"policy", a.random ? "random" : "trained"},
            {"stage", a.stage},
            {"episodes", rep.episodes},
            {"success_rate", rep.success_rate},
            {"mean_final_distance", rep.mean_final_distance},
            {"min_mu", rep.min_mu},
            {"singular_terminations", rep.singular_terminations}});
  return kExitOk;
}

struct MonitorArgs {
  std::string listen;
  bool use_stdin = false;
  std::optional<double> hz;
  std::string mode = "streaming";
  double duration = 0.0;
};

int cmd_monitor(Context& ctx, const MonitorArgs& a) {
  if (a.listen.empty() == !a.use_stdin) throw UsageError("give exactly one of --listen host:port or --stdin");
  MonitorConfig mc = ctx.cfg.monitor;
  if (a.hz) {
    if (!(*a.hz > 0.0)) throw UsageError("--hz must be positive");
    mc.f_monitor = *a.hz;
  }
  ServiceMode mode;
  if (a.mode == "streaming") {
    mode = ServiceMode::Streaming;
  } else if (a.mode == "timed") {
    mode = ServiceMode::Timed;
  } else {
    throw UsageError("--mode must be streaming or timed");
  }
  if (a.use_stdin) {
    StreamChannel channel(ctx.in, ctx.out);
    Monitor monitor(ctx.cfg.model, *ctx.cfg.engine, mc);
    if (mode == ServiceMode::Streaming) {
      serve_streaming(channel, monitor);
    } else {
      std::stop_source never;
      serve_timed(channel, monitor, never.get_token());
    }
    return kExitOk;
  }
  std::pair<std::string, std::uint16_t> ep;
  try {
    ep = parse_endpoint(a.listen);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  TcpServer server(ctx.cfg.model, *ctx.cfg.engine, mc, mode);
  server.start(ep.first, ep.second);
  ctx.emit({{"command", "monitor"}, {"type", "listening"}, {"host", ep.first}, {"port", server.port()},
            {"mode", a.mode}, {"monitor_hz", mc.f_monitor}});
  if (a.duration > 0.0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(a.duration));
    server.stop();
  } else {
    server.wait();
  }
  return kExitOk;
}

struct ScanArgs {
  int samples = 10000;
  std::uint64_t skip = 0;
  std::string out;
};

int cmd_scan(Context& ctx, const ScanArgs& a) {
  if (a.samples < 1) throw UsageError("--samples must be positive");
  ScanSpec spec;
  spec.samples = a.samples;
  spec.skip = a.skip;
  spec.monitor = ctx.cfg.monitor;
  const ScanReport rep = workspace_scan(ctx.cfg.model, spec);
  std::filesystem::path path = a.out.empty() ? ctx.cfg.output_dir / "workspace_scan.csv" : std::filesystem::path(a.out);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_scan_csv(rep, path);
  const auto& f = rep.fractions;
  json actions = json::object();
  for (int i = 0; i < 4; ++i) actions[std::string(to_string(static_cast<EmergencyAction>(i)))] = f.action[i];
  ctx.emit({{"command", "workspace-scan"},
            {"samples", rep.rows.size()},
            {"csv", path.string()},
            {"probe",
             {{"q", vec(rep.probe.q.q)},
              {"mu", rep.probe.metrics.mu},
              {"kappa", rep.probe.metrics.kappa},
              {"sigma_min", rep.probe.metrics.sigma_min},
              {"tier", to_string(rep.probe.tier)}}},
            {"percentiles",
             {{"p", kScanPercentiles},
              {"mu", rep.percentiles.mu},
              {"kappa", rep.percentiles.kappa},
              {"sigma_min", rep.percentiles.sigma_min}}},
            {"fractions",
             {{"mu_below_0.005", f.mu_below_stop},
              {"mu_below_0.01", f.mu_below_critical},
              {"mu_below_0.05", f.mu_below_warning},
              {"kappa_above_500", f.kappa_above_stop},
              {"kappa_above_100", f.kappa_above_critical},
              {"kappa_above_50", f.kappa_above_warning},
              {"action", actions}}}});
  return kExitOk;
}

struct CurvesArgs {
  std::string log;
  std::string out;
};

int cmd_curves(Context& ctx, const CurvesArgs& a) {
  std::ifstream in(a.log);
  if (!in) throw UsageError("cannot open training log " + a.log);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("training log " + a.log + ": " + e.what());
  }
  rl::TrainingLog log;
  try {
    log = rl::training_log_from_json(doc);
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
  const std::filesystem::path path = a.out.empty() ? ctx.cfg.output_dir / "curves.csv" : std::filesystem::path(a.out);
  rl::export_curves(log, path);
  ctx.emit({{"command", "export-curves"}, {"updates", log.updates.size()}, {"out", path.string()}});
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + std::min(argc, 1), argv + argc);
  return run(args, std::cin, out, err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return run(args, std::cin, out, err);
}

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Singularity-aware IK, fuzzy safety assessment, curriculum PPO and live monitoring for a UR10.",
               "singularguard"};
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);

  std::string config_path;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "Config file (default: $SINGULARGUARD_CONFIG or the shipped default)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random choice");

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve-ik", "Multi-start IK filtered by the singularity thresholds");
  solve_cmd->add_option("--target", solve.target, "x,y,z in metres")->required()->delimiter(',')->allow_extra_args(false);
  solve_cmd->add_option("--ranking", solve.ranking, "max_manipulability or fuzzy_safety_score");

  AssessArgs assess;
  auto* assess_cmd = app.add_subcommand("assess", "Fuzzy safety level and emergency action for a state");
  assess_cmd->add_option("--mu", assess.mu, "Manipulability");
  assess_cmd->add_option("--kappa", assess.kappa, "Condition number");
  assess_cmd->add_option("--q", assess.q, "Six joint angles (rad)")->delimiter(',');
  assess_cmd->add_option("--qdot", assess.qdot, "Six joint rates (rad/s), default zero")->delimiter(',');

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Curriculum PPO training; writes params, curves and log");
  train_cmd->add_option("--episodes", train.episodes, "Episode budget");
  train_cmd->add_option("--stage", train.stage, "Starting curriculum stage (1-4)");
  train_cmd->add_option("--out", train.out_dir, "Output directory (default: config output_dir)");
  train_cmd->add_flag("--verbose", train.verbose, "Emit one record per episode");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Greedy rollouts of a saved policy, or of random actions");
  eval_cmd->add_option("--params", eval.params, "Parameter file from train");
  eval_cmd->add_flag("--random", eval.random, "Uniform random actions instead of a policy");
  eval_cmd->add_option("--stage", eval.stage, "Curriculum stage (1-4)");
  eval_cmd->add_option("--episodes", eval.episodes, "Number of episodes");

  MonitorArgs mon;
  auto* mon_cmd = app.add_subcommand("monitor", "NDJSON safety monitor over TCP or stdin/stdout");
  mon_cmd->add_option("--listen", mon.listen, "host:port to listen on (port 0 picks one)");
  mon_cmd->add_flag("--stdin", mon.use_stdin, "Read requests from stdin, write events to stdout");
  mon_cmd->add_option("--hz", mon.hz, "Base monitoring frequency");
  mon_cmd->add_option("--mode", mon.mode, "streaming (one event per request) or timed");
  mon_cmd->add_option("--duration", mon.duration, "Stop the TCP server after this many seconds");

  ScanArgs scan;
  auto* scan_cmd = app.add_subcommand("workspace-scan", "Sobol scan of metric distributions and tier fractions");
  scan_cmd->add_option("--samples", scan.samples, "Number of configurations");
  scan_cmd->add_option("--skip", scan.skip, "Sobol points to skip");
  scan_cmd->add_option("--out", scan.out, "CSV path (default: <output_dir>/workspace_scan.csv)");

  CurvesArgs curves;
  auto* curves_cmd = app.add_subcommand("export-curves", "Learning-curve CSV from a training log");
  curves_cmd->add_option("--log", curves.log, "training_log.json from train")->required();
  curves_cmd->add_option("--out", curves.out, "CSV path (default: <output_dir>/curves.csv)");

  auto* config_cmd = app.add_subcommand("config", "Print the effective configuration");

  std::vector<const char*> argv{"singularguard"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    Context ctx{in, out, err, load_config(resolve_config_path(
                                  config_path.empty() ? std::nullopt
                                                      : std::optional<std::filesystem::path>(config_path)))};
    if (*seed_opt) ctx.cfg.train.seed = seed;
    if (*solve_cmd) return cmd_solve(ctx, solve);
    if (*assess_cmd) return cmd_assess(ctx, assess);
    if (*train_cmd) return cmd_train(ctx, train);
    if (*eval_cmd) return cmd_eval(ctx, eval);
    if (*mon_cmd) return cmd_monitor(ctx, mon);
    if (*scan_cmd) return cmd_scan(ctx, scan);
    if (*curves_cmd) return cmd_curves(ctx, curves);
    if (*config_cmd) {
      out << config_to_json(ctx.cfg).dump() << '\n';
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace singularguard::cli
