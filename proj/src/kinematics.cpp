#include "singularguard/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace singularguard {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kReachTolerance = 1e-6;

Vec6 from_list(std::initializer_list<double> values, const char* what) {
  if (values.size() != kNumJoints) {
    throw std::invalid_argument(std::string(what) + " needs exactly 6 values");
  }
  Vec6 v;
  std::copy(values.begin(), values.end(), v.data());
  return v;
}

Mat4 dh_transform(const DhRow& row, double q) {
  const double theta = q + row.theta_offset;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
  Mat4 t;
  t << ct, -st * ca, st * sa, row.a * ct,
       st, ct * ca, -ct * sa, row.a * st,
       0.0, sa, ca, row.d,
       0.0, 0.0, 0.0, 1.0;
  return t;
}

Vec3 flange_position(const std::array<DhRow, kNumJoints>& rows, const Vec6& q) {
  Mat4 t = Mat4::Identity();
  for (int i = 0; i < kNumJoints; ++i) t = t * dh_transform(rows[i], q[i]);
  return t.block<3, 1>(0, 3);
}

}  // namespace

JointConfig::JointConfig(std::initializer_list<double> angles)
    : q(from_list(angles, "JointConfig")) {}

JointVelocities::JointVelocities(std::initializer_list<double> rates)
    : qdot(from_list(rates, "JointVelocities")) {}

KinematicModel::KinematicModel(std::array<DhRow, kNumJoints> rows,
                               std::array<JointLimit, kNumJoints> limits,
                               double max_reach)
    : rows_(rows), limits_(limits), max_reach_(max_reach) {
  for (int i = 0; i < kNumJoints; ++i) {
    const auto& r = rows_[i];
    if (!std::isfinite(r.a) || !std::isfinite(r.d) || !std::isfinite(r.alpha) ||
        !std::isfinite(r.theta_offset)) {
      throw std::invalid_argument("DH row " + std::to_string(i + 1) + " is not finite");
    }
    if (!(limits_[i].lo < limits_[i].hi)) {
      throw std::invalid_argument("joint " + std::to_string(i + 1) +
                                  " limit requires lo < hi");
    }
  }
  if (!(max_reach_ > 0.0)) throw std::invalid_argument("max_reach must be positive");
  const double derived = derive_max_reach(rows_).reach;
  if (std::abs(derived - max_reach_) > kReachTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "max_reach " << max_reach_ << " does not match the DH table (derived "
        << derived << ")";
    throw std::invalid_argument(msg.str());
  }
}

const std::array<DhRow, kNumJoints>& KinematicModel::ur10_dh() {
  static const std::array<DhRow, kNumJoints> rows{{
      {0.0, 0.1273, kPi / 2, 0.0},
      {-0.612, 0.0, 0.0, 0.0},
      {-0.5723, 0.0, 0.0, 0.0},
      {0.0, 0.163941, kPi / 2, 0.0},
      {0.0, 0.1157, -kPi / 2, 0.0},
      {0.0, 0.0922, 0.0, 0.0},
  }};
  return rows;
}

KinematicModel KinematicModel::ur10() {
  static const KinematicModel model = [] {
    std::array<JointLimit, kNumJoints> limits;
    limits.fill({-2 * kPi, 2 * kPi});
    return KinematicModel(ur10_dh(), limits, kUr10MaxReach);
  }();
  return model;
}

bool KinematicModel::within_limits(const JointConfig& q) const {
  for (int i = 0; i < kNumJoints; ++i) {
    if (q[i] < limits_[i].lo || q[i] > limits_[i].hi) return false;
  }
  return true;
}

std::array<Mat4, kNumJoints + 1> joint_frames(const KinematicModel& model,
                                              const JointConfig& q) {
  std::array<Mat4, kNumJoints + 1> frames;
  frames[0] = Mat4::Identity();
  for (int i = 0; i < kNumJoints; ++i) {
    frames[i + 1] = frames[i] * dh_transform(model.dh_rows()[i], q[i]);
  }
  return frames;
}

TcpPose forward_kinematics(const KinematicModel& model, const JointConfig& q) {
  const auto frames = joint_frames(model, q);
  return {frames.back().block<3, 1>(0, 3), frames.back().block<3, 3>(0, 0)};
}

Jacobian compute_jacobian(const KinematicModel& model, const JointConfig& q) {
  const auto frames = joint_frames(model, q);
  const Vec3 p = frames.back().block<3, 1>(0, 3);
  Jacobian j;
  for (int i = 0; i < kNumJoints; ++i) {
    const Vec3 z = frames[i].block<3, 1>(0, 2);
    const Vec3 o = frames[i].block<3, 1>(0, 3);
    j.block<3, 1>(0, i) = z.cross(p - o);
    j.block<3, 1>(3, i) = z;
  }
  return j;
}

JointConfig clamp_to_limits(const KinematicModel& model, const JointConfig& q) {
  JointConfig out = q;
  for (int i = 0; i < kNumJoints; ++i) {
    out[i] = std::clamp(q[i], model.limits()[i].lo, model.limits()[i].hi);
  }
  return out;
}

ReachResult derive_max_reach(const std::array<DhRow, kNumJoints>& rows) {
  auto sq_reach = [&](const Vec6& q) { return flange_position(rows, q).squaredNorm(); };

  // Coarse grid over the four middle joints; joint 1 preserves the distance
  // and joint 6 spins the flange about its own axis.
  constexpr int kGrid = 8;
  constexpr int kStarts = 12;
  std::vector<std::pair<double, Vec6>> seeds;
  seeds.reserve(kGrid * kGrid * kGrid * kGrid);
  Vec6 q = Vec6::Zero();
  for (int a = 0; a < kGrid; ++a)
    for (int b = 0; b < kGrid; ++b)
      for (int c = 0; c < kGrid; ++c)
        for (int d = 0; d < kGrid; ++d) {
          q << 0.0, -kPi + 2 * kPi * a / kGrid, -kPi + 2 * kPi * b / kGrid,
              -kPi + 2 * kPi * c / kGrid, -kPi + 2 * kPi * d / kGrid, 0.0;
          seeds.emplace_back(sq_reach(q), q);
        }
  std::partial_sort(seeds.begin(), seeds.begin() + kStarts, seeds.end(),
                    [](const auto& l, const auto& r) { return l.first > r.first; });

  ReachResult best;
  for (int s = 0; s < kStarts; ++s) {
    Vec6 x = seeds[s].second;
    double f = seeds[s].first;
    for (int sweep = 0; sweep < 2000; ++sweep) {
      const double before = f;
      for (int i = 0; i < kNumJoints; ++i) {
        // |p|^2 = A + B cos(q_i) + C sin(q_i) with the other joints fixed.
        Vec6 t = x;
        t[i] = 0.0;
        const double f0 = sq_reach(t);
        t[i] = kPi;
        const double fpi = sq_reach(t);
        t[i] = kPi / 2;
        const double fhalf = sq_reach(t);
        const double mean = 0.5 * (f0 + fpi);
        const double b = 0.5 * (f0 - fpi);
        const double c = fhalf - mean;
        x[i] = std::atan2(c, b);
        f = sq_reach(x);
      }
      if (f - before <= 1e-15) break;
    }
    const double r = std::sqrt(f);
    if (r > best.reach) best = {r, JointConfig(x)};
  }
  return best;
}

}  // namespace singularguard
