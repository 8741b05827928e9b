#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "singularguard/monitor.hpp"

namespace singularguard {

/// Newline-delimited JSON codec for the monitor stream.
///
/// Request:  {"q":[6 numbers],"qdot":[6 numbers]}; a null element stands for a
///           non-finite reading and produces a data-fault stop.
/// Response: {"type":"event","tick","ts","tcp":[3],"mu","kappa","sigma_min",
///           "safety_level","safety_score","action","velocity_scale"?,
///           "monitor_hz","severity","velocity_warning","data_fault","stale",
///           "notice"?}

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StateRequest {
  JointConfig q;
  JointVelocities qdot;
};

/// Throws WireError on malformed JSON or wrong shapes.
StateRequest parse_request(std::string_view line);

/// Output records keep their fields in insertion order.
using Record = nlohmann::ordered_json;

Record event_to_json(const MonitorEvent& ev);
Record velocity_warning_json(const MonitorEvent& ev);
Record error_json(std::string_view message);

/// Single line, no trailing newline. NaN is written as null.
std::string to_line(const Record& doc);

}  // namespace singularguard
