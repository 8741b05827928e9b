#include "singularguard/wire.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace singularguard {

using nlohmann::json;

namespace {

Vec6 read_vec6(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) throw WireError(std::string("missing field \"") + key + "\"");
  if (!it->is_array() || it->size() != 6) {
    throw WireError(std::string("field \"") + key + "\" must be an array of 6 numbers");
  }
  Vec6 v;
  for (int i = 0; i < 6; ++i) {
    const json& x = (*it)[i];
    if (x.is_null()) {
      v[i] = std::numeric_limits<double>::quiet_NaN();
    } else if (x.is_number()) {
      v[i] = x.get<double>();
    } else {
      throw WireError(std::string("field \"") + key + "\" must be an array of 6 numbers");
    }
  }
  return v;
}

Record number(double x) { return std::isfinite(x) ? Record(x) : Record(nullptr); }

}  // namespace

StateRequest parse_request(std::string_view line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& e) {
    throw WireError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw WireError("request must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "q" && key != "qdot") throw WireError("unknown request field \"" + key + "\"");
  }
  StateRequest req;
  req.q.q = read_vec6(doc, "q");
  req.qdot.qdot = read_vec6(doc, "qdot");
  return req;
}

Record event_to_json(const MonitorEvent& ev) {
  Record out = {
      {"type", "event"},
      {"tick", ev.tick},
      {"ts", ev.ts},
      {"tcp", {number(ev.tcp.x()), number(ev.tcp.y()), number(ev.tcp.z())}},
      {"mu", number(ev.metrics.mu)},
      {"kappa", number(ev.metrics.kappa)},
      {"sigma_min", number(ev.metrics.sigma_min)},
      {"safety_level", to_string(ev.assessment.classification)},
      {"safety_score", number(ev.assessment.safety_score)},
      {"action", to_string(ev.decision.action)},
  };
  if (ev.decision.velocity_scale) out["velocity_scale"] = *ev.decision.velocity_scale;
  out["monitor_hz"] = ev.monitor_hz;
  out["severity"] = to_string(ev.severity);
  out["velocity_warning"] = ev.velocity_warning;
  out["data_fault"] = ev.data_fault;
  out["stale"] = ev.stale;
  if (!ev.notice.empty()) out["notice"] = ev.notice;
  return out;
}

Record velocity_warning_json(const MonitorEvent& ev) {
  double peak = 0.0;
  for (int i = 0; i < kNumJoints; ++i) peak = std::max(peak, std::abs(ev.qdot.qdot[i]));
  return {{"type", "velocity_warning"}, {"tick", ev.tick}, {"ts", ev.ts}, {"max_qdot", peak}};
}

Record error_json(std::string_view message) {
  return {{"type", "error"}, {"error", std::string(message)}};
}

std::string to_line(const Record& doc) {
  return doc.dump(-1, ' ', false, Record::error_handler_t::replace);
}

}  // namespace singularguard
