#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "singularguard/fuzzy.hpp"
#include "singularguard/kinematics.hpp"
#include "singularguard/metrics.hpp"

namespace singularguard {

enum class EmergencyAction { EmergencyStop, CriticalWarning, Warning, Normal };

/// Wire names: EMERGENCY_STOP, CRITICAL_WARNING, WARNING, NORMAL.
std::string_view to_string(EmergencyAction action);
std::optional<EmergencyAction> parse_emergency_action(std::string_view name);

/// Tier boundaries of the emergency decision tree.
struct EmergencyThresholds {
  double mu_stop = 0.005;
  double kappa_stop = 500.0;
  double mu_critical = 0.01;
  double kappa_critical = 100.0;
  double velocity_stop = 0.5;
  double mu_warning = 0.05;
  double kappa_warning = 50.0;
  double critical_velocity_scale = 0.10;
  double warning_velocity_scale = 0.50;
};

struct MonitorConfig {
  double f_monitor = 10.0;
  double f_elevated = 20.0;
  /// Max joint speed (rad/s) above which a velocity warning is issued.
  double v_threshold = 0.8;
  /// Consecutive non-WARNING ticks before dropping back to f_monitor.
  int deescalate_after = 10;
  /// A sample older than this many intervals is flagged stale.
  int stale_intervals = 3;
  EmergencyThresholds emergency;
  MetricThresholds metrics;

  void validate() const;
};

struct EmergencyDecision {
  EmergencyAction action = EmergencyAction::Normal;
  /// Present for CRITICAL_WARNING (0.10) and WARNING (0.50).
  std::optional<double> velocity_scale;
  /// Present for WARNING: the escalated monitoring frequency.
  std::optional<double> monitor_hz;

  bool operator==(const EmergencyDecision&) const = default;
};

/// First-match decision tree. Total: non-finite inputs stop the robot.
EmergencyDecision emergency_decision(double mu, double kappa, const JointVelocities& qdot,
                                     const MonitorConfig& cfg = {});

enum class Severity { Info, Warning, High, Critical };
std::string_view to_string(Severity s);

struct MonitorEvent {
  std::int64_t tick = 0;
  /// Seconds since the monitor started.
  double ts = 0.0;
  JointConfig q;
  JointVelocities qdot;
  Vec3 tcp = Vec3::Zero();
  SingularityMetrics metrics;
  SafetyAssessment assessment;
  EmergencyDecision decision;
  bool velocity_warning = false;
  /// The sample held a non-finite value; metrics are NaN and the action is a stop.
  bool data_fault = false;
  bool stale = false;
  Severity severity = Severity::Info;
  /// Operator notification text for stop and critical events, else empty.
  std::string notice;
  /// Frequency in effect for the next tick.
  double monitor_hz = 10.0;
};

/// FK, metrics, fuzzy assessment and decision for one state. Leaves tick,
/// ts, stale and monitor_hz at their defaults.
MonitorEvent evaluate_state(const KinematicModel& model, const FuzzyEngine& engine,
                            const MonitorConfig& cfg, const JointConfig& q,
                            const JointVelocities& qdot);

/// Per-session state: tick counter and the WARNING frequency hysteresis.
class Monitor {
 public:
  Monitor(const KinematicModel& model, const FuzzyEngine& engine, MonitorConfig cfg);

  MonitorEvent process(const JointConfig& q, const JointVelocities& qdot, double ts,
                       bool stale = false);

  double frequency() const { return hz_; }
  std::chrono::nanoseconds period() const;
  const MonitorConfig& config() const { return cfg_; }
  std::int64_t ticks() const { return tick_; }

 private:
  const KinematicModel* model_;
  const FuzzyEngine* engine_;
  MonitorConfig cfg_;
  double hz_;
  int calm_ticks_ = 0;
  std::int64_t tick_ = 0;
};

struct StateSample {
  JointConfig q;
  JointVelocities qdot;
  std::chrono::steady_clock::time_point received = std::chrono::steady_clock::now();
};

class SourceClosed : public std::runtime_error {
 public:
  SourceClosed() : std::runtime_error("state source closed") {}
};

class StateSource {
 public:
  virtual ~StateSource() = default;
  /// Most recent sample, nullopt before the first one. Throws SourceClosed
  /// once the source has ended.
  virtual std::optional<StateSample> latest() = 0;
};

class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void on_event(const MonitorEvent& event) = 0;
  /// Called after on_event for the same tick.
  virtual void on_velocity_warning(const MonitorEvent& /*event*/) {}
};

/// Thread-safe holder fed by a producer thread.
class LatestStateSource : public StateSource {
 public:
  void push(StateSample sample);
  void close();
  std::optional<StateSample> latest() override;

 private:
  std::mutex mu_;
  std::optional<StateSample> sample_;
  bool closed_ = false;
};

/// Hands out one scripted sample per call, stamped with the call time, then
/// closes.
class ScriptedSource : public StateSource {
 public:
  explicit ScriptedSource(std::vector<std::pair<JointConfig, JointVelocities>> samples);
  std::optional<StateSample> latest() override;

 private:
  std::deque<std::pair<JointConfig, JointVelocities>> samples_;
};

enum class LoopExit { Cancelled, SourceClosed };

struct LoopSummary {
  std::int64_t ticks = 0;
  std::int64_t events = 0;
  LoopExit exit = LoopExit::Cancelled;
};

/// Ticks on an absolute schedule at the monitor's current frequency until
/// `stop` is requested or the source closes. A stop request wakes the loop
/// immediately.
LoopSummary run_monitor_loop(Monitor& monitor, StateSource& source, EventSink& sink,
                             std::stop_token stop);

}  // namespace singularguard
