#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "singularguard/scan.hpp"

using namespace singularguard;

namespace {

const ScanReport& report() {
  static const ScanReport r = [] {
    ScanSpec spec;
    spec.samples = 2000;
    return workspace_scan(KinematicModel::ur10(), spec);
  }();
  return r;
}

}  // namespace

TEST_CASE("percentile interpolates linearly") {
  CHECK(percentile({3.0, 1.0, 2.0}, 50) == 2.0);
  CHECK(percentile({1.0, 2.0}, 50) == 1.5);
  CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 0) == 1.0);
  CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 100) == 4.0);
  CHECK(percentile({5.0}, 99) == 5.0);
  CHECK_THROWS_AS(percentile({}, 50), std::invalid_argument);
}

TEST_CASE("probe, sample count and joint limits") {
  const auto& r = report();
  CHECK(r.rows.size() == 2000);
  CHECK(r.probe.q == JointConfig{});
  CHECK(r.probe.tier == EmergencyAction::EmergencyStop);
  const auto m = KinematicModel::ur10();
  for (const auto& row : r.rows) CHECK(m.within_limits(row.q));
}

TEST_CASE("tier fractions nest and actions sum to one") {
  const auto& f = report().fractions;
  CHECK(f.mu_below_stop <= f.mu_below_critical);
  CHECK(f.mu_below_critical <= f.mu_below_warning);
  CHECK(f.kappa_above_stop <= f.kappa_above_critical);
  CHECK(f.kappa_above_critical <= f.kappa_above_warning);
  double total = 0.0;
  for (double a : f.action) total += a;
  CHECK(total == doctest::Approx(1.0));
  CHECK(f.action[0] >= f.mu_below_stop);
  CHECK(f.action[0] >= f.kappa_above_stop);
}

TEST_CASE("percentiles are monotone") {
  const auto& p = report().percentiles;
  for (std::size_t k = 1; k < kScanPercentiles.size(); ++k) {
    CHECK(p.mu[k] >= p.mu[k - 1]);
    CHECK(p.kappa[k] >= p.kappa[k - 1]);
    CHECK(p.sigma_min[k] >= p.sigma_min[k - 1]);
  }
}

TEST_CASE("Sobol sampling is deterministic and skip shifts the sequence") {
  ScanSpec spec;
  spec.samples = 50;
  const ScanReport a = workspace_scan(KinematicModel::ur10(), spec);
  for (int i = 0; i < 50; ++i) CHECK(a.rows[i].q == report().rows[i].q);
  spec.skip = 10;
  const ScanReport b = workspace_scan(KinematicModel::ur10(), spec);
  CHECK(b.rows[0].q == report().rows[10].q);
  spec.samples = 0;
  CHECK_THROWS_AS(workspace_scan(KinematicModel::ur10(), spec), std::invalid_argument);
}

TEST_CASE("CSV layout") {
  const auto path = std::filesystem::temp_directory_path() / ("sg_scan_" + std::to_string(::getpid()) + ".csv");
  write_scan_csv(report(), path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# schema: singularguard.scan/1");
  std::getline(in, line);
  CHECK(line == "kind,q1,q2,q3,q4,q5,q6,mu,kappa,sigma_min,tier");
  std::getline(in, line);
  CHECK(line.rfind("probe,0,0,0,0,0,0,", 0) == 0);
  CHECK(line.size() > 20);
  CHECK(line.substr(line.rfind(',') + 1) == "EMERGENCY_STOP");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2000);
  std::filesystem::remove(path);
}
