#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "singularguard/fuzzy.hpp"
#include "singularguard/ik.hpp"
#include "singularguard/metrics.hpp"
#include "singularguard/monitor.hpp"
#include "singularguard/rl/trainer.hpp"
#include "singularguard/scan.hpp"
#include "singularguard/wire.hpp"

namespace py = pybind11;
using namespace singularguard;

namespace {

const KinematicModel& ur10() {
  static const KinematicModel m = KinematicModel::ur10();
  return m;
}

JointConfig joints(const Vec6& q) { return JointConfig(q); }

py::object to_python(const nlohmann::ordered_json& doc) {
  return py::module_::import("json").attr("loads")(doc.dump());
}

IkConfig ik_config(const std::string& ranking) {
  IkConfig cfg = IkConfig::defaults(ur10());
  if (ranking == "fuzzy") {
    cfg.ranking = IkRanking::FuzzySafetyScore;
    cfg.fuzzy = &FuzzyEngine::shipped();
  } else if (ranking != "manipulability") {
    throw py::value_error("ranking must be 'manipulability' or 'fuzzy'");
  }
  return cfg;
}

rl::ReachEnv make_env() { return rl::ReachEnv(ur10(), rl::EnvConfig{}, IkConfig::defaults(ur10())); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Singularity-aware UR10 kinematics, fuzzy safety and monitoring";

  py::class_<SingularityMetrics>(m, "SingularityMetrics")
      .def_readonly("mu", &SingularityMetrics::mu)
      .def_readonly("kappa", &SingularityMetrics::kappa)
      .def_readonly("sigma_min", &SingularityMetrics::sigma_min)
      .def_readonly("sigma_max", &SingularityMetrics::sigma_max)
      .def("__repr__", [](const SingularityMetrics& s) {
        return "SingularityMetrics(mu=" + std::to_string(s.mu) + ", kappa=" + std::to_string(s.kappa) +
               ", sigma_min=" + std::to_string(s.sigma_min) + ")";
      });

  m.attr("MAX_REACH") = KinematicModel::kUr10MaxReach;

  m.def(
      "forward_kinematics",
      [](const Vec6& q) {
        const TcpPose p = forward_kinematics(ur10(), joints(q));
        return py::make_tuple(p.position, p.orientation);
      },
      py::arg("q"), "TCP position (3,) and orientation (3, 3).");
  m.def("jacobian", [](const Vec6& q) { return compute_jacobian(ur10(), joints(q)); }, py::arg("q"));
  m.def("metrics", [](const Vec6& q) { return compute_metrics(ur10(), joints(q)); }, py::arg("q"));
  m.def("passes_thresholds", [](const SingularityMetrics& s) { return passes_thresholds(s, MetricThresholds{}); },
        py::arg("metrics"));

  py::class_<IkSolution>(m, "IkSolution")
      .def_property_readonly("q", [](const IkSolution& s) { return s.q.q; })
      .def_readonly("residual", &IkSolution::residual)
      .def_readonly("metrics", &IkSolution::metrics)
      .def_readonly("safety_score", &IkSolution::safety_score)
      .def_readonly("guess_index", &IkSolution::guess_index);

  m.def(
      "solve_ik",
      [](const Vec3& target, const std::string& ranking) -> std::optional<IkSolution> {
        return solve_ik(ur10(), target, ik_config(ranking)).solution;
      },
      py::arg("target"), py::arg("ranking") = "manipulability",
      "Multi-start IK; None when no start converges to a safe solution.");

  py::class_<SafetyAssessment>(m, "SafetyAssessment")
      .def_property_readonly("activations",
                             [](const SafetyAssessment& a) {
                               py::dict d;
                               for (int i = 0; i < kNumLevels; ++i)
                                 d[py::str(std::string(to_string(static_cast<SafetyLevel>(i))))] = a.activations[i];
                               return d;
                             })
      .def_readonly("safety_score", &SafetyAssessment::safety_score)
      .def_property_readonly("level", [](const SafetyAssessment& a) { return std::string(to_string(a.classification)); })
      .def_readonly("v_bar", &SafetyAssessment::v_bar);

  m.def(
      "assess",
      [](double mu, double kappa, double v_bar) { return FuzzyEngine::shipped().assess_inputs(mu, kappa, v_bar); },
      py::arg("mu"), py::arg("kappa"), py::arg("v_bar"));

  m.def(
      "emergency_decision",
      [](double mu, double kappa, const Vec6& qdot) {
        const EmergencyDecision d = emergency_decision(mu, kappa, JointVelocities(qdot));
        py::dict out;
        out["action"] = std::string(to_string(d.action));
        out["velocity_scale"] = d.velocity_scale;
        out["monitor_hz"] = d.monitor_hz;
        return out;
      },
      py::arg("mu"), py::arg("kappa"), py::arg("qdot"));

  m.def(
      "monitor_event",
      [](const Vec6& q, const Vec6& qdot) {
        const MonitorEvent ev =
            evaluate_state(ur10(), FuzzyEngine::shipped(), MonitorConfig{}, joints(q), JointVelocities(qdot));
        return to_python(event_to_json(ev));
      },
      py::arg("q"), py::arg("qdot"), "One monitor evaluation as a wire event record.");

  py::class_<rl::TrainResult>(m, "TrainResult")
      .def_property_readonly("log", [](const rl::TrainResult& r) { return to_python(rl::training_log_to_json(r.log)); })
      .def_property_readonly("final_stage", [](const rl::TrainResult& r) { return r.log.final_stage; })
      .def("curves_csv", [](const rl::TrainResult& r) { return rl::curves_csv(r.log); })
      .def("save_params", [](const rl::TrainResult& r, const std::filesystem::path& p) { rl::save_params(r.model, p); },
           py::arg("path"));

  m.def(
      "train",
      [](int episodes, std::uint64_t seed, int start_stage) {
        rl::TrainConfig cfg;
        cfg.episodes = episodes;
        cfg.seed = seed;
        cfg.start_stage = start_stage;
        py::gil_scoped_release release;
        rl::ReachEnv env = make_env();
        return rl::train(env, cfg);
      },
      py::arg("episodes") = 2000, py::arg("seed") = 0, py::arg("start_stage") = 1);

  m.def(
      "evaluate",
      [](const std::filesystem::path& params, int stage, int episodes, std::uint64_t seed) {
        const rl::ActorCritic model = rl::load_params(params);
        py::gil_scoped_release release;
        rl::ReachEnv env = make_env();
        rl::Rng rng(seed);
        const rl::SuccessReport r = rl::evaluate(model, env, rl::curriculum_stage(stage), episodes, rng);
        py::gil_scoped_acquire acquire;
        py::dict out;
        out["episodes"] = r.episodes;
        out["success_rate"] = r.success_rate;
        out["mean_final_distance"] = r.mean_final_distance;
        out["min_mu"] = r.min_mu;
        return out;
      },
      py::arg("params"), py::arg("stage") = 1, py::arg("episodes") = 50, py::arg("seed") = 0);

  m.def(
      "workspace_scan",
      [](int samples, std::uint64_t skip) {
        ScanSpec spec;
        spec.samples = samples;
        spec.skip = skip;
        ScanReport r;
        {
          py::gil_scoped_release release;
          r = workspace_scan(ur10(), spec);
        }
        py::dict fractions;
        fractions["mu_below_stop"] = r.fractions.mu_below_stop;
        fractions["mu_below_critical"] = r.fractions.mu_below_critical;
        fractions["mu_below_warning"] = r.fractions.mu_below_warning;
        fractions["kappa_above_stop"] = r.fractions.kappa_above_stop;
        fractions["kappa_above_critical"] = r.fractions.kappa_above_critical;
        fractions["kappa_above_warning"] = r.fractions.kappa_above_warning;
        py::dict actions;
        for (int i = 0; i < 4; ++i)
          actions[py::str(std::string(to_string(static_cast<EmergencyAction>(i))))] = r.fractions.action[i];
        py::dict out;
        out["samples"] = r.rows.size();
        out["fractions"] = fractions;
        out["actions"] = actions;
        out["mu_percentiles"] = r.percentiles.mu;
        out["kappa_percentiles"] = r.percentiles.kappa;
        return out;
      },
      py::arg("samples") = 10000, py::arg("skip") = 0);

  py::register_exception<RuleBaseError>(m, "RuleBaseError", PyExc_ValueError);
}
