#include "singularguard/scan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

#include <boost/random/sobol.hpp>

namespace singularguard {

namespace {

ScanRow classify(const KinematicModel& model, const JointConfig& q, const MonitorConfig& cfg) {
  ScanRow row;
  row.q = q;
  row.metrics = compute_metrics(model, q, cfg.metrics);
  row.tier = emergency_decision(row.metrics.mu, row.metrics.kappa, JointVelocities{}, cfg).action;
  return row;
}

}  // namespace

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ScanReport workspace_scan(const KinematicModel& model, const ScanSpec& spec) {
  if (spec.samples < 1) throw std::invalid_argument("scan needs at least one sample");
  spec.monitor.validate();
  ScanReport report;
  report.probe = classify(model, JointConfig{}, spec.monitor);

  boost::random::sobol qrng(kNumJoints);
  if (spec.skip) qrng.discard(spec.skip * kNumJoints);
  const double span = static_cast<double>(qrng.max() - qrng.min()) + 1.0;
  report.rows.reserve(spec.samples);
  for (int n = 0; n < spec.samples; ++n) {
    JointConfig q;
    for (int i = 0; i < kNumJoints; ++i) {
      const double u = static_cast<double>(qrng() - qrng.min()) / span;
      const auto& lim = model.limits()[i];
      q[i] = lim.lo + u * (lim.hi - lim.lo);
    }
    report.rows.push_back(classify(model, q, spec.monitor));
  }

  std::vector<double> mu, kappa, sigma;
  for (const auto& r : report.rows) {
    mu.push_back(r.metrics.mu);
    kappa.push_back(r.metrics.kappa);
    sigma.push_back(r.metrics.sigma_min);
  }
  for (std::size_t k = 0; k < kScanPercentiles.size(); ++k) {
    report.percentiles.mu[k] = percentile(mu, kScanPercentiles[k]);
    report.percentiles.kappa[k] = percentile(kappa, kScanPercentiles[k]);
    report.percentiles.sigma_min[k] = percentile(sigma, kScanPercentiles[k]);
  }

  const auto& t = spec.monitor.emergency;
  auto& f = report.fractions;
  std::array<long, 6> counts{};
  std::array<long, 4> actions{};
  for (const auto& r : report.rows) {
    counts[0] += r.metrics.mu < t.mu_stop;
    counts[1] += r.metrics.mu < t.mu_critical;
    counts[2] += r.metrics.mu < t.mu_warning;
    counts[3] += r.metrics.kappa > t.kappa_stop;
    counts[4] += r.metrics.kappa > t.kappa_critical;
    counts[5] += r.metrics.kappa > t.kappa_warning;
    ++actions[static_cast<int>(r.tier)];
  }
  const double n = static_cast<double>(report.rows.size());
  f.mu_below_stop = counts[0] / n;
  f.mu_below_critical = counts[1] / n;
  f.mu_below_warning = counts[2] / n;
  f.kappa_above_stop = counts[3] / n;
  f.kappa_above_critical = counts[4] / n;
  f.kappa_above_warning = counts[5] / n;
  for (int i = 0; i < 4; ++i) f.action[i] = actions[i] / n;
  return report;
}

void write_scan_csv(const ScanReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write scan to " + path.string());
  out << "# schema: singularguard.scan/1\n";
  out << "kind,q1,q2,q3,q4,q5,q6,mu,kappa,sigma_min,tier\n";
  out << std::setprecision(17);
  auto row = [&](const char* kind, const ScanRow& r) {
    out << kind;
    for (int i = 0; i < kNumJoints; ++i) out << ',' << r.q[i];
    out << ',' << r.metrics.mu << ',' << r.metrics.kappa << ',' << r.metrics.sigma_min << ','
        << to_string(r.tier) << '\n';
  };
  row("probe", report.probe);
  for (const auto& r : report.rows) row("sample", r);
  out.flush();
  if (!out) throw std::runtime_error("failed while writing " + path.string());
}

}  // namespace singularguard
