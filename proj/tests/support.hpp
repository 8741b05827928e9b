#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "singularguard/kinematics.hpp"

namespace sgtest {

using singularguard::JointConfig;
using singularguard::KinematicModel;

inline JointConfig random_config(const KinematicModel& model, std::mt19937_64& rng) {
  JointConfig q;
  for (int i = 0; i < singularguard::kNumJoints; ++i) {
    const auto& lim = model.limits()[i];
    q[i] = std::uniform_real_distribution<double>(lim.lo, lim.hi)(rng);
  }
  return q;
}

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline std::string data_path(const std::string& name) { return std::string(SG_TEST_DATA_DIR) + "/" + name; }

}  // namespace sgtest
