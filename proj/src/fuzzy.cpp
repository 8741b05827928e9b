#include "singularguard/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#ifndef SINGULARGUARD_DEFAULT_DATA_DIR
#define SINGULARGUARD_DEFAULT_DATA_DIR "data"
#endif

namespace singularguard {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumLevels> kLevelNames = {
    "EmergencyStop", "Critical", "Warning", "Caution", "Safe", "Optimal"};
constexpr std::array<std::string_view, kNumInputs> kInputNames = {
    "manipulability", "condition_quality", "velocity"};

struct WeightBand {
  double lo;
  double hi;
};

// Emergency stops carry full weight, critical rules 0.8-0.9, warnings and
// cautions sit in the moderate band (the hand-written warnings span 0.5-0.8),
// optimal rules 0.9-1.0.
constexpr std::array<WeightBand, kNumLevels> kWeightBands = {{
    {1.0, 1.0}, {0.8, 0.9}, {0.5, 0.8}, {0.6, 0.7}, {0.6, 0.8}, {0.9, 1.0}}};

double axis_value(const LinguisticVariable& v, double x) {
  return v.log_axis ? std::log10(x) : x;
}

MembershipFunction on_axis(const LinguisticVariable& v, const MembershipFunction& mf) {
  if (!v.log_axis) return mf;
  return {std::log10(mf.a), std::log10(mf.b), std::log10(mf.c)};
}

std::string describe(const FuzzyRule& r) {
  return "rule " + std::to_string(r.id);
}

}  // namespace

std::string_view to_string(SafetyLevel level) {
  return kLevelNames[static_cast<int>(level)];
}

std::optional<SafetyLevel> parse_safety_level(std::string_view name) {
  for (int i = 0; i < kNumLevels; ++i) {
    if (kLevelNames[i] == name) return static_cast<SafetyLevel>(i);
  }
  return std::nullopt;
}

std::string_view to_string(FuzzyInput input) {
  return kInputNames[static_cast<int>(input)];
}

double triangular_mf(double x, const MembershipFunction& mf) {
  if (x < mf.a || x > mf.c) return 0.0;
  if (x == mf.b) return 1.0;
  if (x < mf.b) return (x - mf.a) / (mf.b - mf.a);
  return (mf.c - x) / (mf.c - mf.b);
}

std::optional<int> LinguisticVariable::term_index(std::string_view term) const {
  for (int i = 0; i < kTermsPerInput; ++i) {
    if (term_names[i] == term) return i;
  }
  return std::nullopt;
}

std::array<double, kTermsPerInput> LinguisticVariable::fuzzify(double x) const {
  const double lo = axis_value(*this, terms.front().b);
  const double hi = axis_value(*this, terms.back().b);
  // log10 of a non-positive input is -inf or NaN; both clamp to the low end.
  double u = axis_value(*this, x);
  u = std::isnan(u) ? lo : std::clamp(u, lo, hi);
  std::array<double, kTermsPerInput> m{};
  for (int i = 0; i < kTermsPerInput; ++i) m[i] = triangular_mf(u, on_axis(*this, terms[i]));
  return m;
}

LinguisticVariable LinguisticVariable::partition(
    FuzzyInput input, bool log_axis, std::array<std::string, kTermsPerInput> names,
    const std::array<double, kTermsPerInput>& cores) {
  LinguisticVariable v;
  v.input = input;
  v.log_axis = log_axis;
  v.term_names = std::move(names);
  for (int i = 0; i < kTermsPerInput; ++i) {
    const double left = i == 0 ? cores[i] : cores[i - 1];
    const double right = i == kTermsPerInput - 1 ? cores[i] : cores[i + 1];
    v.terms[i] = {left, cores[i], right};
  }
  return v;
}

RuleBaseError::RuleBaseError(const ValidationReport& report)
    : std::runtime_error([&] {
        std::ostringstream msg;
        msg << "rule base rejected (" << report.violations.size() << " violation"
            << (report.violations.size() == 1 ? "" : "s") << ")";
        for (const auto& v : report.violations) msg << "\n  - " << v;
        return msg.str();
      }()),
      report_(report) {}

ValidationReport validate_rules(const std::vector<FuzzyRule>& rules,
                                const LinguisticVariables& vars, int expected_count) {
  ValidationReport report;
  auto add = [&](std::string msg) { report.violations.push_back(std::move(msg)); };

  for (int v = 0; v < kNumInputs; ++v) {
    const auto& var = vars[v];
    const std::string name(to_string(static_cast<FuzzyInput>(v)));
    if (var.input != static_cast<FuzzyInput>(v)) add(name + ": variable out of order");
    for (int t = 0; t < kTermsPerInput; ++t) {
      const auto& mf = var.terms[t];
      if (!(mf.a <= mf.b && mf.b <= mf.c)) add(name + "." + var.term_names[t] + ": needs a <= b <= c");
      if (var.log_axis && !(mf.a > 0.0)) add(name + "." + var.term_names[t] + ": log axis needs positive breakpoints");
      if (t > 0 && !(var.terms[t - 1].b < mf.b)) add(name + ": term cores must strictly increase");
    }
    bool partition_ok = true;
    const double lo = var.terms.front().b, hi = var.terms.back().b;
    for (int k = 0; k <= 1000 && partition_ok; ++k) {
      const double u = var.log_axis
                           ? std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * k / 1000.0)
                           : lo + (hi - lo) * k / 1000.0;
      const auto m = var.fuzzify(u);
      double sum = 0.0;
      for (double x : m) sum += x;
      if (std::abs(sum - 1.0) > 1e-9) partition_ok = false;
    }
    if (!partition_ok) add(name + ": memberships do not sum to 1 across the axis");
  }

  if (static_cast<int>(rules.size()) != expected_count) {
    add("expected " + std::to_string(expected_count) + " rules, found " +
        std::to_string(rules.size()));
  }

  bool terms_ok = true;
  for (const auto& r : rules) {
    if (r.conditions.empty() || r.conditions.size() > 3) {
      add(describe(r) + ": needs 1-3 conditions");
    }
    std::array<bool, kNumInputs> seen{};
    for (const auto& c : r.conditions) {
      const int v = static_cast<int>(c.input);
      if (v < 0 || v >= kNumInputs) {
        add(describe(r) + ": unknown input variable");
        terms_ok = false;
        continue;
      }
      if (seen[v]) add(describe(r) + ": repeats " + std::string(to_string(c.input)));
      seen[v] = true;
      if (c.term < 0 || c.term >= kTermsPerInput) {
        add(describe(r) + ": unknown term #" + std::to_string(c.term + 1) + " for " +
            std::string(to_string(c.input)));
        terms_ok = false;
      }
    }
    const auto band = kWeightBands[static_cast<int>(r.conclusion)];
    if (!(r.weight > 0.0 && r.weight <= 1.0)) {
      add(describe(r) + ": weight must lie in (0, 1]");
    } else if (r.weight < band.lo - 1e-12 || r.weight > band.hi + 1e-12) {
      std::ostringstream msg;
      msg << describe(r) << ": weight " << r.weight << " outside the " << to_string(r.conclusion)
          << " band [" << band.lo << ", " << band.hi << "]";
      add(msg.str());
    }
  }

  if (terms_ok) {
    for (int m = 0; m < kTermsPerInput; ++m)
      for (int k = 0; k < kTermsPerInput; ++k)
        for (int v = 0; v < kTermsPerInput; ++v) {
          const std::array<int, kNumInputs> cell = {m, k, v};
          const bool fired = std::any_of(rules.begin(), rules.end(), [&](const FuzzyRule& r) {
            return std::all_of(r.conditions.begin(), r.conditions.end(), [&](const RuleCondition& c) {
              return cell[static_cast<int>(c.input)] == c.term;
            });
          });
          if (!fired) {
            add("coverage hole at (" + vars[0].term_names[m] + ", " + vars[1].term_names[k] +
                ", " + vars[2].term_names[v] + ")");
          }
        }
  }
  return report;
}

double mean_joint_speed(const JointVelocities& qdot) {
  return qdot.qdot.cwiseAbs().sum() / kNumJoints;
}

FuzzyEngine::FuzzyEngine(LinguisticVariables vars, std::vector<FuzzyRule> rules,
                         std::array<double, kNumLevels> level_scores, int expected_rule_count)
    : vars_(std::move(vars)), rules_(std::move(rules)), scores_(level_scores) {
  ValidationReport report = validate_rules(rules_, vars_, expected_rule_count);
  for (int i = 1; i < kNumLevels; ++i) {
    if (!(scores_[i - 1] < scores_[i])) {
      report.violations.push_back("level scores must strictly increase toward Optimal");
      break;
    }
  }
  if (!report.ok()) throw RuleBaseError(report);
}

std::array<double, kNumLevels> FuzzyEngine::activations(
    const std::array<std::array<double, kTermsPerInput>, kNumInputs>& memberships) const {
  std::array<double, kNumLevels> a{};
  for (const auto& rule : rules_) {
    double strength = 1.0;
    for (const auto& c : rule.conditions) {
      strength = std::min(strength, memberships[static_cast<int>(c.input)][c.term]);
    }
    strength *= rule.weight;
    auto& slot = a[static_cast<int>(rule.conclusion)];
    slot = std::max(slot, strength);
  }
  return a;
}

SafetyAssessment FuzzyEngine::assess_inputs(double mu, double kappa, double v_bar) const {
  const std::array<std::array<double, kTermsPerInput>, kNumInputs> memberships = {
      vars_[0].fuzzify(mu), vars_[1].fuzzify(kappa), vars_[2].fuzzify(v_bar)};

  SafetyAssessment out;
  out.v_bar = v_bar;
  out.activations = activations(memberships);

  double total = 0.0, weighted = 0.0;
  int best = -1;
  for (int i = 0; i < kNumLevels; ++i) {
    const double ai = out.activations[i];
    total += ai;
    weighted += ai * scores_[i];
    // Strict comparison keeps the more dangerous level on ties.
    if (ai > 0.0 && (best < 0 || ai > out.activations[best])) best = i;
  }
  if (best < 0) throw NoRuleFired();
  out.safety_score = weighted / total;
  out.classification = static_cast<SafetyLevel>(best);
  return out;
}

SafetyAssessment FuzzyEngine::assess(const SingularityMetrics& metrics,
                                     const JointVelocities& qdot) const {
  return assess_inputs(metrics.mu, metrics.kappa, mean_joint_speed(qdot));
}

LinguisticVariables variables_from_json(const json& doc) {
  if (!doc.is_array() || doc.size() != kNumInputs) {
    throw std::invalid_argument("fuzzy variables: expected an array of 3 variables");
  }
  LinguisticVariables vars;
  for (const auto& entry : doc) {
    const std::string name = entry.at("name").get<std::string>();
    int slot = -1;
    for (int i = 0; i < kNumInputs; ++i) {
      if (kInputNames[i] == name) slot = i;
    }
    if (slot < 0) throw std::invalid_argument("fuzzy variables: unknown variable '" + name + "'");
    auto& v = vars[slot];
    v.input = static_cast<FuzzyInput>(slot);
    const std::string axis = entry.value("axis", "linear");
    if (axis != "linear" && axis != "log10") {
      throw std::invalid_argument("fuzzy variables: axis must be linear or log10");
    }
    v.log_axis = axis == "log10";
    const auto& terms = entry.at("terms");
    if (!terms.is_array() || terms.size() != kTermsPerInput) {
      throw std::invalid_argument("fuzzy variables: '" + name + "' needs exactly 5 terms");
    }
    for (int t = 0; t < kTermsPerInput; ++t) {
      v.term_names[t] = terms[t].at("name").get<std::string>();
      v.terms[t] = {terms[t].at("a").get<double>(), terms[t].at("b").get<double>(),
                    terms[t].at("c").get<double>()};
    }
  }
  return vars;
}

std::vector<FuzzyRule> rules_from_json(const json& doc, const LinguisticVariables& vars) {
  ValidationReport unresolved;
  std::vector<FuzzyRule> rules;
  for (const auto& entry : doc) {
    FuzzyRule r;
    r.id = entry.at("id").get<int>();
    r.weight = entry.at("weight").get<double>();
    r.description = entry.value("description", "");
    const std::string then = entry.at("then").get<std::string>();
    if (auto level = parse_safety_level(then)) {
      r.conclusion = *level;
    } else {
      unresolved.violations.push_back("rule " + std::to_string(r.id) + ": unknown level '" + then + "'");
    }
    for (const auto& cond : entry.at("if")) {
      const std::string var = cond.at(0).get<std::string>();
      const std::string term = cond.at(1).get<std::string>();
      int slot = -1;
      for (int i = 0; i < kNumInputs; ++i) {
        if (kInputNames[i] == var) slot = i;
      }
      if (slot < 0) {
        unresolved.violations.push_back("rule " + std::to_string(r.id) + ": unknown variable '" + var + "'");
        continue;
      }
      const auto idx = vars[slot].term_index(term);
      if (!idx) {
        unresolved.violations.push_back("rule " + std::to_string(r.id) + ": unknown term '" + term +
                                        "' for " + var);
        continue;
      }
      r.conditions.push_back({static_cast<FuzzyInput>(slot), *idx});
    }
    rules.push_back(std::move(r));
  }
  if (!unresolved.ok()) throw RuleBaseError(unresolved);
  return rules;
}

FuzzyEngine FuzzyEngine::from_json(const json& doc, int expected_rule_count) {
  LinguisticVariables vars = variables_from_json(doc.at("variables"));
  std::vector<FuzzyRule> rules = rules_from_json(doc.at("rules"), vars);
  std::array<double, kNumLevels> scores{};
  const auto& s = doc.at("level_scores");
  for (int i = 0; i < kNumLevels; ++i) scores[i] = s.at(std::string(kLevelNames[i])).get<double>();
  return FuzzyEngine(std::move(vars), std::move(rules), scores, expected_rule_count);
}

FuzzyEngine FuzzyEngine::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rule base " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("rule base " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

const FuzzyEngine& FuzzyEngine::shipped() {
  static const FuzzyEngine engine = load(default_data_dir() / "fuzzy_rules.json");
  return engine;
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("SINGULARGUARD_DATA_DIR"); env && *env) return env;
  return SINGULARGUARD_DEFAULT_DATA_DIR;
}

}  // namespace singularguard
