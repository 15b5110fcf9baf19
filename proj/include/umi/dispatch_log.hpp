#pragma once

// Dispatch log JSONL: one sent command per line.
//   {"t_send": f64, "t_target": f64, "actuator": "robot",   "pose": [x,y,z,qw,qx,qy,qz]}
//   {"t_send": f64, "t_target": f64, "actuator": "gripper", "width": f64}

#include <ostream>
#include <string>
#include <vector>

#include "umi/jsonl.hpp"
#include "umi/scheduler.hpp"

namespace umi {

inline void write_dispatch_log(std::ostream& os, const std::vector<Command>& commands) {
  for (const Command& c : commands) {
    ordered_json j;
    j["t_send"] = c.t_send;
    j["t_target"] = c.t_target;
    j["actuator"] = to_string(c.actuator);
    if (c.actuator == Actuator::Robot) {
      j["pose"] = pose_to_json(c.pose);
    } else {
      j["width"] = c.width;
    }
    os << j.dump() << "\n";
  }
}

inline std::vector<Command> read_dispatch_log(std::istream& is) {
  std::vector<Command> commands;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      raise("parse", "dispatch log line " + std::to_string(line_no) + ": " + e.what());
    }
    Command c;
    c.t_send = j.at("t_send").get<double>();
    c.t_target = j.at("t_target").get<double>();
    const std::string actuator = j.at("actuator").get<std::string>();
    if (actuator == "robot") {
      c.actuator = Actuator::Robot;
      c.pose = pose_from_json(j.at("pose"));
    } else if (actuator == "gripper") {
      c.actuator = Actuator::Gripper;
      c.width = j.at("width").get<double>();
    } else {
      raise("parse", "dispatch log line " + std::to_string(line_no) + ": unknown actuator '" +
                         actuator + "'");
    }
    commands.push_back(std::move(c));
  }
  return commands;
}

}  // namespace umi
