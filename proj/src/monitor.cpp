#include "singularguard/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <limits>

namespace singularguard {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

double max_abs(const JointVelocities& qdot) { return qdot.qdot.cwiseAbs().maxCoeff(); }

}  // namespace

std::string_view to_string(EmergencyAction action) {
  switch (action) {
    case EmergencyAction::EmergencyStop: return "EMERGENCY_STOP";
    case EmergencyAction::CriticalWarning: return "CRITICAL_WARNING";
    case EmergencyAction::Warning: return "WARNING";
    case EmergencyAction::Normal: return "NORMAL";
  }
  return "UNKNOWN";
}

std::optional<EmergencyAction> parse_emergency_action(std::string_view name) {
  for (auto a : {EmergencyAction::EmergencyStop, EmergencyAction::CriticalWarning,
                 EmergencyAction::Warning, EmergencyAction::Normal}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::Info: return "info";
    case Severity::Warning: return "warning";
    case Severity::High: return "high";
    case Severity::Critical: return "critical";
  }
  return "unknown";
}

void MonitorConfig::validate() const {
  if (!(f_monitor > 0.0) || !std::isfinite(f_monitor)) throw std::invalid_argument("monitor.f_monitor must be positive");
  if (!(f_elevated > 0.0) || !std::isfinite(f_elevated)) throw std::invalid_argument("monitor.f_elevated must be positive");
  if (!(v_threshold > 0.0)) throw std::invalid_argument("monitor.v_threshold must be positive");
  if (deescalate_after < 1) throw std::invalid_argument("monitor.deescalate_after must be at least 1");
  if (stale_intervals < 1) throw std::invalid_argument("monitor.stale_intervals must be at least 1");
  const auto& e = emergency;
  if (!(e.mu_stop < e.mu_critical && e.mu_critical < e.mu_warning)) {
    throw std::invalid_argument("emergency mu tiers must increase: stop < critical < warning");
  }
  if (!(e.kappa_warning < e.kappa_critical && e.kappa_critical < e.kappa_stop)) {
    throw std::invalid_argument("emergency kappa tiers must increase: warning < critical < stop");
  }
  if (!(e.velocity_stop > 0.0)) throw std::invalid_argument("emergency velocity_stop must be positive");
}

EmergencyDecision emergency_decision(double mu, double kappa, const JointVelocities& qdot,
                                     const MonitorConfig& cfg) {
  const auto& t = cfg.emergency;
  if (!std::isfinite(mu) || !std::isfinite(kappa) || !qdot.finite()) {
    return {EmergencyAction::EmergencyStop, std::nullopt, std::nullopt};
  }
  if (mu < t.mu_stop || kappa > t.kappa_stop) {
    return {EmergencyAction::EmergencyStop, std::nullopt, std::nullopt};
  }
  if (mu < t.mu_critical || kappa > t.kappa_critical) {
    if (max_abs(qdot) > t.velocity_stop) return {EmergencyAction::EmergencyStop, std::nullopt, std::nullopt};
    return {EmergencyAction::CriticalWarning, t.critical_velocity_scale, std::nullopt};
  }
  if (mu < t.mu_warning || kappa > t.kappa_warning) {
    return {EmergencyAction::Warning, t.warning_velocity_scale, cfg.f_elevated};
  }
  return {EmergencyAction::Normal, std::nullopt, std::nullopt};
}

MonitorEvent evaluate_state(const KinematicModel& model, const FuzzyEngine& engine,
                            const MonitorConfig& cfg, const JointConfig& q,
                            const JointVelocities& qdot) {
  MonitorEvent ev;
  ev.q = q;
  ev.qdot = qdot;
  ev.velocity_warning = qdot.finite() && max_abs(qdot) > cfg.v_threshold;
  if (!q.finite() || !qdot.finite()) {
    ev.data_fault = true;
    ev.tcp = Vec3::Constant(kNaN);
    ev.metrics = {kNaN, kNaN, kNaN, kNaN};
    ev.assessment.classification = SafetyLevel::EmergencyStop;
    ev.assessment.activations[static_cast<int>(SafetyLevel::EmergencyStop)] = 1.0;
    ev.assessment.safety_score = engine.level_scores()[0];
    ev.assessment.v_bar = kNaN;
    ev.decision = {EmergencyAction::EmergencyStop, std::nullopt, std::nullopt};
    ev.severity = Severity::Critical;
    ev.notice = "emergency stop: non-finite joint state received";
    return ev;
  }
  ev.tcp = forward_kinematics(model, q).position;
  ev.metrics = compute_metrics(model, q, cfg.metrics);
  ev.assessment = engine.assess(ev.metrics, qdot);
  ev.decision = emergency_decision(ev.metrics.mu, ev.metrics.kappa, qdot, cfg);
  switch (ev.decision.action) {
    case EmergencyAction::EmergencyStop:
      ev.severity = Severity::Critical;
      ev.notice = "emergency stop: critical singularity (mu=" + short_number(ev.metrics.mu) +
                  ", kappa=" + short_number(ev.metrics.kappa) + ")";
      break;
    case EmergencyAction::CriticalWarning:
      ev.severity = Severity::High;
      ev.notice = "critical warning: approaching singularity, reduce velocity to 10%";
      break;
    case EmergencyAction::Warning: ev.severity = Severity::Warning; break;
    case EmergencyAction::Normal: ev.severity = Severity::Info; break;
  }
  return ev;
}

Monitor::Monitor(const KinematicModel& model, const FuzzyEngine& engine, MonitorConfig cfg)
    : model_(&model), engine_(&engine), cfg_(std::move(cfg)), hz_(cfg_.f_monitor) {
  cfg_.validate();
}

std::chrono::nanoseconds Monitor::period() const {
  return std::chrono::nanoseconds(static_cast<std::int64_t>(std::llround(1e9 / hz_)));
}

MonitorEvent Monitor::process(const JointConfig& q, const JointVelocities& qdot, double ts,
                              bool stale) {
  MonitorEvent ev = evaluate_state(*model_, *engine_, cfg_, q, qdot);
  if (ev.decision.action == EmergencyAction::Warning) {
    hz_ = cfg_.f_elevated;
    calm_ticks_ = 0;
  } else if (hz_ != cfg_.f_monitor && ++calm_ticks_ >= cfg_.deescalate_after) {
    hz_ = cfg_.f_monitor;
    calm_ticks_ = 0;
  }
  ev.tick = tick_++;
  ev.ts = ts;
  ev.stale = stale;
  ev.monitor_hz = hz_;
  return ev;
}

void LatestStateSource::push(StateSample sample) {
  std::lock_guard lock(mu_);
  sample_ = std::move(sample);
}

void LatestStateSource::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
}

std::optional<StateSample> LatestStateSource::latest() {
  std::lock_guard lock(mu_);
  if (closed_) throw SourceClosed();
  return sample_;
}

ScriptedSource::ScriptedSource(std::vector<std::pair<JointConfig, JointVelocities>> samples)
    : samples_(samples.begin(), samples.end()) {}

std::optional<StateSample> ScriptedSource::latest() {
  if (samples_.empty()) throw SourceClosed();
  StateSample s{samples_.front().first, samples_.front().second, std::chrono::steady_clock::now()};
  samples_.pop_front();
  return s;
}

LoopSummary run_monitor_loop(Monitor& monitor, StateSource& source, EventSink& sink,
                             std::stop_token stop) {
  using clock = std::chrono::steady_clock;
  LoopSummary summary;
  std::mutex mu;
  std::condition_variable_any cv;
  const auto start = clock::now();
  auto next = start;
  while (true) {
    {
      std::unique_lock lock(mu);
      cv.wait_until(lock, stop, next, [] { return false; });
    }
    if (stop.stop_requested()) {
      summary.exit = LoopExit::Cancelled;
      break;
    }
    const auto now = clock::now();
    std::optional<StateSample> sample;
    try {
      sample = source.latest();
    } catch (const SourceClosed&) {
      summary.exit = LoopExit::SourceClosed;
      break;
    }
    ++summary.ticks;
    const auto interval = monitor.period();
    if (sample) {
      const bool stale = now - sample->received > monitor.config().stale_intervals * interval;
      const double ts = std::chrono::duration<double>(now - start).count();
      const MonitorEvent ev = monitor.process(sample->q, sample->qdot, ts, stale);
      sink.on_event(ev);
      ++summary.events;
      if (ev.velocity_warning) sink.on_velocity_warning(ev);
    }
    next += monitor.period();
    // After an overrun, resume from now rather than bursting to catch up.
    if (next < clock::now()) next = clock::now();
  }
  return summary;
}

}  // namespace singularguard
