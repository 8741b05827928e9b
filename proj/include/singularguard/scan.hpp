#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "singularguard/kinematics.hpp"
#include "singularguard/metrics.hpp"
#include "singularguard/monitor.hpp"

namespace singularguard {

struct ScanSpec {
  int samples = 10000;
  /// Sobol points skipped before sampling starts.
  std::uint64_t skip = 0;
  MonitorConfig monitor;
};

struct ScanRow {
  JointConfig q;
  SingularityMetrics metrics;
  /// Decision tree result at zero joint velocity.
  EmergencyAction tier = EmergencyAction::Normal;
};

inline constexpr std::array<double, 9> kScanPercentiles{1, 5, 10, 25, 50, 75, 90, 95, 99};

struct PercentileTable {
  std::array<double, kScanPercentiles.size()> mu{};
  std::array<double, kScanPercentiles.size()> kappa{};
  std::array<double, kScanPercentiles.size()> sigma_min{};
};

struct TierFractions {
  double mu_below_stop = 0.0;      // mu < 0.005
  double mu_below_critical = 0.0;  // mu < 0.01
  double mu_below_warning = 0.0;   // mu < 0.05
  double kappa_above_stop = 0.0;
  double kappa_above_critical = 0.0;
  double kappa_above_warning = 0.0;
  /// Share of samples per decision-tree outcome, indexed by EmergencyAction.
  std::array<double, 4> action{};
};

struct ScanReport {
  ScanRow probe;
  std::vector<ScanRow> rows;
  PercentileTable percentiles;
  TierFractions fractions;
};

/// Linear-interpolated percentile (0-100) of unsorted values.
double percentile(std::vector<double> values, double p);

/// Sobol-sampled configurations spanning the joint limits, plus the all-zero
/// probe pose.
ScanReport workspace_scan(const KinematicModel& model, const ScanSpec& spec);

/// Header "# schema: singularguard.scan/1", then
/// kind,q1..q6,mu,kappa,sigma_min,tier with the probe row first.
void write_scan_csv(const ScanReport& report, const std::filesystem::path& path);

}  // namespace singularguard
