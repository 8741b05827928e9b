#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "singularguard/kinematics.hpp"
#include "support.hpp"

using namespace singularguard;

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 fk(const KinematicModel& m, const JointConfig& q) { return forward_kinematics(m, q).position; }

}  // namespace

TEST_CASE("joint config needs exactly six finite values") {
  CHECK_THROWS_AS(JointConfig({1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(JointConfig({1, 2, 3, 4, 5, 6, 7}), std::invalid_argument);
  JointConfig q{0, 0, 0, 0, 0, std::nan("")};
  CHECK_FALSE(q.finite());
  CHECK(JointConfig{1, 2, 3, 4, 5, 6}.finite());
}

TEST_CASE("model validation") {
  const auto& dh = KinematicModel::ur10_dh();
  std::array<JointLimit, kNumJoints> limits;
  limits.fill({-2 * kPi, 2 * kPi});
  CHECK_NOTHROW(KinematicModel(dh, limits, KinematicModel::kUr10MaxReach));
  CHECK_THROWS_AS(KinematicModel(dh, limits, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(KinematicModel(dh, limits, -1.0), std::invalid_argument);
  auto bad = limits;
  bad[2] = {1.0, -1.0};
  CHECK_THROWS_AS(KinematicModel(dh, bad, KinematicModel::kUr10MaxReach), std::invalid_argument);
  auto nan_rows = dh;
  nan_rows[0].d = std::nan("");
  CHECK_THROWS_AS(KinematicModel(nan_rows, limits, KinematicModel::kUr10MaxReach), std::invalid_argument);
}

TEST_CASE("zero pose matches the DH chain worked by hand") {
  // At zero angles: links 2 and 3 lie along base x (a2 + a3), d4 and d6 push
  // along -y after the two alpha = pi/2 twists, d1 - d5 is the height.
  const auto m = KinematicModel::ur10();
  const Vec3 p = fk(m, JointConfig{});
  CHECK(p.x() == doctest::Approx(-0.612 - 0.5723).epsilon(1e-14));
  CHECK(p.y() == doctest::Approx(-(0.163941 + 0.0922)).epsilon(1e-14));
  CHECK(p.z() == doctest::Approx(0.1273 - 0.1157).epsilon(1e-12));
}

TEST_CASE("base rotation by pi mirrors x and y") {
  const auto m = KinematicModel::ur10();
  const Vec3 a = fk(m, JointConfig{});
  const Vec3 b = fk(m, JointConfig{kPi, 0, 0, 0, 0, 0});
  CHECK(std::abs(b.x() + a.x()) < 1e-12);
  CHECK(std::abs(b.y() + a.y()) < 1e-12);
  CHECK(std::abs(b.z() - a.z()) < 1e-12);
}

TEST_CASE("base rotation equivariance, orthonormal rotations, reach bound") {
  const auto m = KinematicModel::ur10();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> delta(-kPi, kPi);
  for (int n = 0; n < 500; ++n) {
    const JointConfig q = sgtest::random_config(m, rng);
    const TcpPose pose = forward_kinematics(m, q);
    CHECK((pose.orientation.transpose() * pose.orientation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(pose.position.norm() <= m.max_reach() + 1e-9);

    const double d = delta(rng);
    JointConfig rotated = q;
    rotated[0] += d;
    const Vec3 expect = Eigen::AngleAxisd(d, Vec3::UnitZ()) * pose.position;
    CHECK((fk(m, rotated) - expect).norm() < 1e-10);
  }
}

TEST_CASE("forward kinematics is bitwise deterministic") {
  const auto m = KinematicModel::ur10();
  const JointConfig q{0.3, -1.1, 0.7, 2.0, -0.4, 1.3};
  const TcpPose a = forward_kinematics(m, q);
  const TcpPose b = forward_kinematics(m, q);
  CHECK(a.position == b.position);
  CHECK(a.orientation == b.orientation);
}

TEST_CASE("Jacobian matches central differences of FK") {
  const auto m = KinematicModel::ur10();
  std::mt19937_64 rng(5);
  const double h = 1e-6;
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    const JointConfig q = sgtest::random_config(m, rng);
    const Jacobian j = compute_jacobian(m, q);
    const Mat3 r0 = forward_kinematics(m, q).orientation;
    for (int i = 0; i < kNumJoints; ++i) {
      JointConfig plus = q, minus = q;
      plus[i] += h;
      minus[i] -= h;
      const TcpPose pp = forward_kinematics(m, plus), pm = forward_kinematics(m, minus);
      const Vec3 dp = (pp.position - pm.position) / (2 * h);
      // Angular rate from the skew part of dR * R^T.
      const Mat3 w = (pp.orientation - pm.orientation) / (2 * h) * r0.transpose();
      const Vec3 dw(w(2, 1), w(0, 2), w(1, 0));
      worst = std::max(worst, (j.col(i).head<3>() - dp).cwiseAbs().maxCoeff());
      worst = std::max(worst, (j.col(i).tail<3>() - dw).cwiseAbs().maxCoeff());
    }
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("stretched zero pose is rank deficient; base joint gives no z motion") {
  const auto m = KinematicModel::ur10();
  const Jacobian j = compute_jacobian(m, JointConfig{});
  Eigen::JacobiSVD<Jacobian> svd(j);
  CHECK(svd.singularValues().minCoeff() < 1e-8);
  std::mt19937_64 rng(3);
  for (int n = 0; n < 50; ++n) {
    CHECK(std::abs(compute_jacobian(m, sgtest::random_config(m, rng))(2, 0)) <= 1e-15);
  }
}

TEST_CASE("clamp to limits") {
  const auto m = KinematicModel::ur10();
  const JointConfig inside{0.1, -0.2, 0.3, -0.4, 0.5, -0.6};
  CHECK(clamp_to_limits(m, inside) == inside);
  JointConfig out = inside;
  out[1] = 10.0;
  out[4] = -10.0;
  const JointConfig c = clamp_to_limits(m, out);
  CHECK(c[1] == m.limits()[1].hi);
  CHECK(c[4] == m.limits()[4].lo);
  CHECK(c[0] == inside[0]);
}

TEST_CASE("max reach: derived value, sampled bound, and the maximiser is singular") {
  const ReachResult r = derive_max_reach(KinematicModel::ur10_dh());
  CHECK(r.reach == doctest::Approx(KinematicModel::kUr10MaxReach).epsilon(1e-12));
  CHECK(fk(KinematicModel::ur10(), r.config).norm() == doctest::Approx(r.reach).epsilon(1e-12));
  const auto m = KinematicModel::ur10();
  std::mt19937_64 rng(1);
  double best = 0.0;
  for (int n = 0; n < 20000; ++n) best = std::max(best, fk(m, sgtest::random_config(m, rng)).norm());
  CHECK(best <= r.reach + 1e-12);
  CHECK(best > 0.9 * r.reach);
}
