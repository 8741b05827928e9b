#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "appendix_rules.hpp"
#include "singularguard/fuzzy.hpp"
#include "support.hpp"

#include <nlohmann/json.hpp>

using namespace singularguard;

namespace {

const FuzzyEngine& engine() { return FuzzyEngine::shipped(); }

double core(FuzzyInput in, int term) { return engine().variables()[static_cast<int>(in)].core(term); }

SafetyAssessment at_cores(int m, int k, int v) {
  return engine().assess_inputs(core(FuzzyInput::Manipulability, m),
                                core(FuzzyInput::ConditionQuality, k), core(FuzzyInput::Velocity, v));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

TEST_CASE("triangular membership") {
  const MembershipFunction mf{1.0, 2.0, 4.0};
  CHECK(triangular_mf(2.0, mf) == 1.0);
  CHECK(triangular_mf(1.5, mf) == doctest::Approx(0.5));
  CHECK(triangular_mf(3.0, mf) == doctest::Approx(0.5));
  CHECK(triangular_mf(0.5, mf) == 0.0);
  CHECK(triangular_mf(4.5, mf) == 0.0);
  const MembershipFunction shoulder{1.0, 1.0, 2.0};
  CHECK(triangular_mf(1.0, shoulder) == 1.0);
}

TEST_CASE("mean joint speed") {
  CHECK(mean_joint_speed(JointVelocities{}) == 0.0);
  JointVelocities all;
  all.qdot << 0.6, -0.6, 0.6, -0.6, 0.6, -0.6;
  CHECK(mean_joint_speed(all) == doctest::Approx(0.6));
  JointVelocities one;
  one.qdot << 0.6, 0, 0, 0, 0, 0;
  CHECK(mean_joint_speed(one) == doctest::Approx(0.1));
}

TEST_CASE("shipped base: 45 rules, no violations, published cores") {
  const auto& e = engine();
  CHECK(e.rules().size() == 45);
  CHECK(validate_rules(e.rules(), e.variables()).ok());
  const std::array<double, 5> mu{0.005, 0.01, 0.05, 0.15, 0.30};
  const std::array<double, 5> kappa{5, 20, 50, 100, 500};
  const std::array<double, 5> vel{0.05, 0.15, 0.35, 0.5, 0.8};
  for (int t = 0; t < 5; ++t) {
    CHECK(core(FuzzyInput::Manipulability, t) == mu[t]);
    CHECK(core(FuzzyInput::ConditionQuality, t) == kappa[t]);
    CHECK(core(FuzzyInput::Velocity, t) == vel[t]);
  }
  CHECK(e.variables()[1].log_axis);
  const std::array<double, kNumLevels> scores{0, 20, 40, 60, 80, 100};
  CHECK(e.level_scores() == scores);
}

TEST_CASE("published assessment examples") {
  // very_low, critical, medium: rule 1 at full strength.
  SafetyAssessment a = at_cores(0, 4, 2);
  CHECK(a.classification == SafetyLevel::EmergencyStop);
  CHECK(a.activations[0] == 1.0);
  CHECK(at_cores(4, 0, 2).classification == SafetyLevel::Optimal);
  // Rule 23 (0.9) beats rule 15 (0.8).
  a = at_cores(3, 1, 1);
  CHECK(a.classification == SafetyLevel::Optimal);
  CHECK(a.activations[static_cast<int>(SafetyLevel::Optimal)] == doctest::Approx(0.9));
  CHECK(a.activations[static_cast<int>(SafetyLevel::Safe)] == doctest::Approx(0.8));
}

TEST_CASE("core grid matches the golden table") {
  std::ifstream in(sgtest::data_path("fuzzy_core_grid.csv"));
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# schema: singularguard.fuzzy_core_grid/1");
  std::getline(in, line);
  const auto& vars = engine().variables();
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    REQUIRE(cells.size() == 11);
    const int m = *vars[0].term_index(cells[0]);
    const int k = *vars[1].term_index(cells[1]);
    const int v = *vars[2].term_index(cells[2]);
    const SafetyAssessment a = at_cores(m, k, v);
    INFO(line);
    CHECK(to_string(a.classification) == cells[3]);
    CHECK(a.safety_score == doctest::Approx(std::stod(cells[4])).epsilon(1e-9));
    for (int l = 0; l < kNumLevels; ++l) CHECK(a.activations[l] == doctest::Approx(std::stod(cells[5 + l])));
    ++rows;
  }
  CHECK(rows == 125);
}

TEST_CASE("published rules are present verbatim and fire at their cores") {
  const auto& vars = engine().variables();
  for (const auto& pub : sgtest::published_rules()) {
    INFO("rule " << pub.id);
    const auto it = std::find_if(engine().rules().begin(), engine().rules().end(),
                                 [&](const FuzzyRule& r) { return r.id == pub.id; });
    REQUIRE(it != engine().rules().end());
    CHECK(it->conclusion == pub.conclusion);
    CHECK(it->weight == pub.weight);
    REQUIRE(it->conditions.size() == pub.conditions.size());
    for (std::size_t c = 0; c < pub.conditions.size(); ++c) {
      CHECK(to_string(it->conditions[c].input) == pub.conditions[c].first);
      CHECK(vars[static_cast<int>(it->conditions[c].input)].term_names[it->conditions[c].term] ==
            pub.conditions[c].second);
    }
    const auto cell = sgtest::rule_cell(pub, vars, {4, 0, 0});
    const SafetyAssessment a = at_cores(cell[0], cell[1], cell[2]);
    CHECK(a.activations[static_cast<int>(pub.conclusion)] >= pub.weight);
  }
}

TEST_CASE("each published rule yields its conclusion or worse at its cores") {
  const auto& vars = engine().variables();
  for (const auto& pub : sgtest::published_rules()) {
    const auto cell = sgtest::rule_cell(pub, vars, {4, 0, 0});
    const SafetyAssessment a = at_cores(cell[0], cell[1], cell[2]);
    INFO("rule " << pub.id);
    if (pub.id == 8) {
      // Rule 21 fires at 1.0 at the safest cores and outranks any warning weight.
      CHECK(a.classification == SafetyLevel::Optimal);
      CHECK(a.activations[static_cast<int>(SafetyLevel::Warning)] == doctest::Approx(0.5));
    } else {
      CHECK(static_cast<int>(a.classification) <= static_cast<int>(pub.conclusion));
    }
  }
}

TEST_CASE("memberships sum to one across each axis") {
  for (const auto& var : engine().variables()) {
    const double lo = var.core(0), hi = var.core(4);
    for (int k = 0; k <= 1000; ++k) {
      const double x = var.log_axis ? std::pow(10.0, std::log10(lo) + (std::log10(hi) - std::log10(lo)) * k / 1000.0)
                                    : lo + (hi - lo) * k / 1000.0;
      const auto m = var.fuzzify(x);
      double sum = 0.0;
      for (double v : m) sum += v;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
    double sum = 0.0;
    for (double v : var.fuzzify(hi * 10)) sum += v;
    CHECK(sum == doctest::Approx(1.0));
  }
}

TEST_CASE("rule order does not change activations; strength never exceeds weight") {
  const auto& e = engine();
  std::vector<FuzzyRule> shuffled = e.rules();
  std::mt19937_64 rng(4);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const FuzzyEngine other(e.variables(), shuffled, e.level_scores());
  std::uniform_real_distribution<double> mu(0.0, 0.35), logk(0.0, 3.0), v(0.0, 1.0);
  for (int n = 0; n < 500; ++n) {
    const double a = mu(rng), k = std::pow(10.0, logk(rng)), s = v(rng);
    const SafetyAssessment x = e.assess_inputs(a, k, s), y = other.assess_inputs(a, k, s);
    CHECK(x.activations == y.activations);
    CHECK(x.classification == y.classification);
    CHECK(x.safety_score == y.safety_score);
    CHECK(x.safety_score >= 0.0);
    CHECK(x.safety_score <= 100.0);
    const std::array<std::array<double, 5>, 3> m = {e.variables()[0].fuzzify(a), e.variables()[1].fuzzify(k),
                                                    e.variables()[2].fuzzify(s)};
    for (const auto& r : e.rules()) {
      double strength = 1.0;
      for (const auto& c : r.conditions) strength = std::min(strength, m[static_cast<int>(c.input)][c.term]);
      CHECK(strength * r.weight <= r.weight);
      CHECK(x.activations[static_cast<int>(r.conclusion)] >= strength * r.weight);
    }
  }
}

TEST_CASE("rule 1 at near-full membership always stops") {
  const auto& vars = engine().variables();
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> v(0.0, 1.5);
  for (double mu : {0.0, 0.005, 0.00502}) {
    for (double kappa : {500.0, 1e6, 495.0}) {
      REQUIRE(vars[0].fuzzify(mu)[0] >= 0.99);
      REQUIRE(vars[1].fuzzify(kappa)[4] >= 0.99);
      for (int n = 0; n < 20; ++n) {
        CHECK(engine().assess_inputs(mu, kappa, v(rng)).classification == SafetyLevel::EmergencyStop);
      }
    }
  }
}

TEST_CASE("ties resolve toward the more dangerous level") {
  // (low, fair, fast): Warning and Caution both at 0.7.
  SafetyAssessment a = at_cores(1, 2, 3);
  REQUIRE(a.activations[2] == a.activations[3]);
  CHECK(a.classification == SafetyLevel::Warning);
  // (medium, poor, very_slow): Caution and Safe both at 0.7.
  a = at_cores(2, 3, 0);
  REQUIRE(a.activations[3] == a.activations[4]);
  CHECK(a.classification == SafetyLevel::Caution);
}

TEST_CASE("validation rejects broken rule bases") {
  const auto& e = engine();
  SUBCASE("unknown term name") {
    nlohmann::json doc = nlohmann::json::parse(std::ifstream(default_data_dir() / "fuzzy_rules.json"));
    doc["rules"][0]["if"][0][1] = "extremely_low";
    try {
      FuzzyEngine::from_json(doc);
      FAIL("accepted an unknown term");
    } catch (const RuleBaseError& err) {
      REQUIRE(err.report().violations.size() == 1);
      CHECK(err.report().violations[0].find("unknown term 'extremely_low'") != std::string::npos);
    }
  }
  SUBCASE("sixth term index") {
    auto rules = e.rules();
    rules[0].conditions[0].term = 5;
    const ValidationReport r = validate_rules(rules, e.variables());
    CHECK_FALSE(r.ok());
  }
  SUBCASE("no Optimal rules leaves coverage holes in high-mu cells") {
    std::vector<FuzzyRule> rules;
    for (const auto& r : e.rules())
      if (r.conclusion != SafetyLevel::Optimal) rules.push_back(r);
    const ValidationReport r = validate_rules(rules, e.variables(), static_cast<int>(rules.size()));
    REQUIRE_FALSE(r.ok());
    bool high_mu_hole = false;
    for (const auto& v : r.violations)
      if (v.find("coverage hole at (very_high") != std::string::npos || v.find("coverage hole at (high") != std::string::npos)
        high_mu_hole = true;
    CHECK(high_mu_hole);
    CHECK_THROWS_AS(FuzzyEngine(e.variables(), rules, e.level_scores(), static_cast<int>(rules.size())),
                    RuleBaseError);
  }
  SUBCASE("weight outside its band") {
    auto rules = e.rules();
    rules[0].weight = 0.3;
    CHECK_FALSE(validate_rules(rules, e.variables()).ok());
  }
  SUBCASE("wrong rule count") {
    auto rules = e.rules();
    rules.pop_back();
    CHECK_FALSE(validate_rules(rules, e.variables()).ok());
  }
  SUBCASE("scores must increase") {
    auto scores = e.level_scores();
    std::swap(scores[0], scores[5]);
    CHECK_THROWS_AS(FuzzyEngine(e.variables(), e.rules(), scores), RuleBaseError);
  }
}

TEST_CASE("non-finite and out-of-range inputs clamp to the axis ends") {
  const auto& e = engine();
  CHECK(e.assess_inputs(-1.0, 1e9, 0.0).classification == SafetyLevel::EmergencyStop);
  CHECK(e.assess_inputs(10.0, 0.5, 0.0).classification == SafetyLevel::Optimal);
}
