#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "singularguard/kinematics.hpp"
#include "singularguard/metrics.hpp"

namespace singularguard {

/// Ordered from most to least dangerous.
enum class SafetyLevel { EmergencyStop = 0, Critical, Warning, Caution, Safe, Optimal };
inline constexpr int kNumLevels = 6;

std::string_view to_string(SafetyLevel level);
std::optional<SafetyLevel> parse_safety_level(std::string_view name);

/// Triangle with feet a, c and peak b. a == b or b == c gives a shoulder.
struct MembershipFunction {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

double triangular_mf(double x, const MembershipFunction& mf);

enum class FuzzyInput { Manipulability = 0, ConditionQuality = 1, Velocity = 2 };
inline constexpr int kNumInputs = 3;
inline constexpr int kTermsPerInput = 5;

std::string_view to_string(FuzzyInput input);

/// Five triangular terms over one input axis. On a log10 axis the stored
/// breakpoints are in natural units and compared against log10(x).
/// Inputs are clamped into [first core, last core] before evaluation.
struct LinguisticVariable {
  FuzzyInput input = FuzzyInput::Manipulability;
  bool log_axis = false;
  std::array<std::string, kTermsPerInput> term_names;
  std::array<MembershipFunction, kTermsPerInput> terms;

  std::string_view name() const { return to_string(input); }
  std::optional<int> term_index(std::string_view term) const;
  std::array<double, kTermsPerInput> fuzzify(double x) const;
  /// Peak of term i in natural units.
  double core(int term) const { return terms[term].b; }

  /// Ruspini partition whose term peaks sit at `cores` (strictly increasing).
  static LinguisticVariable partition(FuzzyInput input, bool log_axis,
                                      std::array<std::string, kTermsPerInput> names,
                                      const std::array<double, kTermsPerInput>& cores);
};

using LinguisticVariables = std::array<LinguisticVariable, kNumInputs>;

struct RuleCondition {
  FuzzyInput input;
  int term;
};

struct FuzzyRule {
  int id = 0;
  std::vector<RuleCondition> conditions;
  SafetyLevel conclusion = SafetyLevel::Safe;
  double weight = 1.0;
  std::string description;
};

struct SafetyAssessment {
  std::array<double, kNumLevels> activations{};
  double safety_score = 0.0;
  SafetyLevel classification = SafetyLevel::EmergencyStop;
  double v_bar = 0.0;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

class NoRuleFired : public std::runtime_error {
 public:
  NoRuleFired() : std::runtime_error("no fuzzy rule fired for this input") {}
};

class RuleBaseError : public std::runtime_error {
 public:
  explicit RuleBaseError(const ValidationReport& report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

inline constexpr int kShippedRuleCount = 45;

/// Structural checks on variables and rules: term names resolve, weights sit
/// in the band for their conclusion, the rule count matches, and every cell
/// of the 5x5x5 core grid fires at least one rule.
ValidationReport validate_rules(const std::vector<FuzzyRule>& rules,
                                const LinguisticVariables& vars,
                                int expected_count = kShippedRuleCount);

double mean_joint_speed(const JointVelocities& qdot);

/// Weighted min/max inference engine. Immutable once constructed.
class FuzzyEngine {
 public:
  /// Throws RuleBaseError if validation fails.
  FuzzyEngine(LinguisticVariables vars, std::vector<FuzzyRule> rules,
              std::array<double, kNumLevels> level_scores,
              int expected_rule_count = kShippedRuleCount);

  static FuzzyEngine from_json(const nlohmann::json& doc,
                               int expected_rule_count = kShippedRuleCount);
  static FuzzyEngine load(const std::filesystem::path& path);
  /// Rule base shipped in the data directory.
  static const FuzzyEngine& shipped();

  SafetyAssessment assess(const SingularityMetrics& metrics,
                          const JointVelocities& qdot) const;
  /// Inference from crisp inputs (mu, kappa, mean joint speed).
  SafetyAssessment assess_inputs(double mu, double kappa, double v_bar) const;
  /// Inference straight from per-variable memberships.
  std::array<double, kNumLevels> activations(
      const std::array<std::array<double, kTermsPerInput>, kNumInputs>& memberships) const;

  const LinguisticVariables& variables() const { return vars_; }
  const std::vector<FuzzyRule>& rules() const { return rules_; }
  const std::array<double, kNumLevels>& level_scores() const { return scores_; }

 private:
  LinguisticVariables vars_;
  std::vector<FuzzyRule> rules_;
  std::array<double, kNumLevels> scores_;
};

std::vector<FuzzyRule> rules_from_json(const nlohmann::json& rules,
                                       const LinguisticVariables& vars);
LinguisticVariables variables_from_json(const nlohmann::json& vars);

std::filesystem::path default_data_dir();

}  // namespace singularguard
