#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace singularguard {

inline constexpr int kNumJoints = 6;

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Six joint angles in radians.
struct JointConfig {
  Vec6 q = Vec6::Zero();

  JointConfig() = default;
  explicit JointConfig(const Vec6& angles) : q(angles) {}
  JointConfig(std::initializer_list<double> angles);

  double operator[](int i) const { return q[i]; }
  double& operator[](int i) { return q[i]; }
  bool finite() const { return q.allFinite(); }
  bool operator==(const JointConfig& o) const { return q == o.q; }
};

/// Six joint rates in rad/s.
struct JointVelocities {
  Vec6 qdot = Vec6::Zero();

  JointVelocities() = default;
  explicit JointVelocities(const Vec6& rates) : qdot(rates) {}
  JointVelocities(std::initializer_list<double> rates);

  double operator[](int i) const { return qdot[i]; }
  bool finite() const { return qdot.allFinite(); }
};

/// Standard DH row: Rz(theta) Tz(d) Tx(a) Rx(alpha).
struct DhRow {
  double a = 0.0;
  double d = 0.0;
  double alpha = 0.0;
  double theta_offset = 0.0;
};

struct JointLimit {
  double lo = 0.0;
  double hi = 0.0;
};

struct TcpPose {
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();
};

/// Rows 0-2 linear (m/rad), rows 3-5 angular (rad/rad).
using Jacobian = Mat6;

/// Immutable description of a 6R serial chain.
///
/// The constructor validates the table: every limit must satisfy lo < hi and
/// the stored reach must agree with the reach derived from the DH rows.
class KinematicModel {
 public:
  KinematicModel(std::array<DhRow, kNumJoints> rows,
                 std::array<JointLimit, kNumJoints> limits, double max_reach);

  /// Manufacturer UR10 table with +-2pi limits.
  static KinematicModel ur10();
  static const std::array<DhRow, kNumJoints>& ur10_dh();
  static constexpr double kUr10MaxReach = 1.4697497132643618;

  const std::array<DhRow, kNumJoints>& dh_rows() const { return rows_; }
  const std::array<JointLimit, kNumJoints>& limits() const { return limits_; }
  double max_reach() const { return max_reach_; }

  bool within_limits(const JointConfig& q) const;

 private:
  std::array<DhRow, kNumJoints> rows_;
  std::array<JointLimit, kNumJoints> limits_;
  double max_reach_;
};

/// Base frame followed by the frame after each joint (7 transforms).
std::array<Mat4, kNumJoints + 1> joint_frames(const KinematicModel& model,
                                              const JointConfig& q);

TcpPose forward_kinematics(const KinematicModel& model, const JointConfig& q);

/// Geometric Jacobian built from the intermediate joint frames.
Jacobian compute_jacobian(const KinematicModel& model, const JointConfig& q);

JointConfig clamp_to_limits(const KinematicModel& model, const JointConfig& q);

/// Largest flange distance from the base origin over all joint angles,
/// ignoring limits. Found by exact per-joint maximisation (|p|^2 is a
/// sinusoid in each single joint angle) from a deterministic set of starts.
/// Also returns the maximising configuration.
struct ReachResult {
  double reach = 0.0;
  JointConfig config;
};
ReachResult derive_max_reach(const std::array<DhRow, kNumJoints>& rows);

}  // namespace singularguard
