#include "singularguard/ik.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "singularguard/fuzzy.hpp"

namespace singularguard {

namespace {

constexpr double kPi = std::numbers::pi;
// Iterations stop early once the residual is this small or stops shrinking.
constexpr double kConvergedResidual = 1e-12;

double residual_of(const KinematicModel& model, const JointConfig& q, const Vec3& target) {
  return (forward_kinematics(model, q).position - target).norm();
}

}  // namespace

std::string_view to_string(IkFailure f) {
  switch (f) {
    case IkFailure::None: return "none";
    case IkFailure::Unreachable: return "unreachable";
    case IkFailure::Unsafe: return "unsafe";
  }
  return "unknown";
}

std::vector<JointConfig> default_guesses(const KinematicModel& model) {
  std::vector<JointConfig> g = {
      {0.0, -kPi / 2, kPi / 2, -kPi / 2, -kPi / 2, 0.0},  // home
      {kPi / 2, -2.0, 1.9, -1.47, -kPi / 2, 0.0},        // elbow up
      {-kPi / 2, -1.0, 1.2, -1.77, -kPi / 2, 0.0},       // elbow up
      {kPi, -0.5, -1.5, -1.14, -kPi / 2, 0.0},           // elbow down
      {-kPi, -2.6, -1.2, 0.63, kPi / 2, 0.0},            // elbow down
  };
  for (auto& q : g) q = clamp_to_limits(model, q);
  return g;
}

IkConfig IkConfig::defaults(const KinematicModel& model) {
  IkConfig cfg;
  cfg.initial_guesses = default_guesses(model);
  return cfg;
}

void IkConfig::validate() const {
  if (initial_guesses.size() != 5) throw std::invalid_argument("IK needs exactly 5 initial guesses");
  for (const auto& g : initial_guesses) {
    if (!g.finite()) throw std::invalid_argument("IK initial guess is not finite");
  }
  if (!(position_tolerance > 0.0)) throw std::invalid_argument("position_tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
  if (!(damping >= 0.0)) throw std::invalid_argument("damping must be non-negative");
  if (ranking == IkRanking::FuzzySafetyScore && fuzzy == nullptr) {
    throw std::invalid_argument("fuzzy ranking needs a fuzzy engine");
  }
}

std::optional<JointConfig> solve_ik_single(const KinematicModel& model, const Vec3& target,
                                           const JointConfig& guess, const IkConfig& cfg) {
  if (!target.allFinite() || !guess.finite()) return std::nullopt;
  if (target.norm() > model.max_reach() + cfg.position_tolerance) return std::nullopt;

  JointConfig q = clamp_to_limits(model, guess);
  Vec3 err = target - forward_kinematics(model, q).position;
  double res = err.norm();
  const double lambda2 = cfg.damping * cfg.damping;

  for (int it = 0; it < cfg.max_iterations && res > kConvergedResidual; ++it) {
    const Eigen::Matrix<double, 3, 6> jv = compute_jacobian(model, q).topRows<3>();
    const Mat3 jjt = jv * jv.transpose() + lambda2 * Mat3::Identity();
    Vec6 step = jv.transpose() * jjt.ldlt().solve(err);
    const double largest = step.cwiseAbs().maxCoeff();
    if (largest > cfg.max_step) step *= cfg.max_step / largest;

    // Backtrack until the projected step reduces the residual.
    bool improved = false;
    for (int halving = 0; halving < 20; ++halving) {
      const JointConfig trial = clamp_to_limits(model, JointConfig(q.q + step));
      const Vec3 trial_err = target - forward_kinematics(model, trial).position;
      const double trial_res = trial_err.norm();
      if (trial_res < res) {
        q = trial;
        err = trial_err;
        res = trial_res;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  if (res > cfg.position_tolerance) return std::nullopt;
  return q;
}

IkResult solve_ik(const KinematicModel& model, const Vec3& target, const IkConfig& cfg) {
  cfg.validate();
  IkResult out;
  bool any_reached = false;
  for (int i = 0; i < static_cast<int>(cfg.initial_guesses.size()); ++i) {
    IkCandidate cand;
    cand.guess_index = i;
    cand.q = solve_ik_single(model, target, cfg.initial_guesses[i], cfg);
    if (cand.q) {
      any_reached = true;
      cand.residual = residual_of(model, *cand.q, target);
      cand.metrics = compute_metrics(model, *cand.q, cfg.thresholds);
      cand.accepted = passes_thresholds(cand.metrics, cfg.thresholds);
    }
    if (cand.accepted) {
      IkSolution s{*cand.q, cand.metrics.mu, cand.residual, cand.metrics, 0.0, i};
      if (cfg.fuzzy != nullptr) s.safety_score = cfg.fuzzy->assess(s.metrics, {}).safety_score;
      const bool better = [&] {
        if (!out.solution) return true;
        if (cfg.ranking == IkRanking::FuzzySafetyScore) {
          return s.safety_score > out.solution->safety_score;
        }
        return s.mu > out.solution->mu;
      }();
      // Strict comparison keeps the lowest guess index on ties.
      if (better) out.solution = s;
    }
    out.candidates.push_back(std::move(cand));
  }
  if (!out.solution) out.failure = any_reached ? IkFailure::Unsafe : IkFailure::Unreachable;
  return out;
}

}  // namespace singularguard
