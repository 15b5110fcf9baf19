#pragma once

// JSONL stream files: one header object followed by one sample object per
// line.
//
//   header: {"stream_id": "...", "kind": "pose"|"width"|"frame",
//            "latency": <f64 s>, "rate": <f64 Hz>, ...extras}
//   pose:   {"t": <f64 s>, "pose": [x, y, z, qw, qx, qy, qz]}
//   width:  {"t": <f64 s>, "width": <f64 m>}
//   frame:  {"t": <f64 s>, "frame": "<string>"}
//
// Pose-stream headers carry "frame_id". Probe headers may carry "waveform",
// "freq_start_hz", "freq_end_hz", "amplitude".

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "umi/error.hpp"
#include "umi/se3.hpp"
#include "umi/stream.hpp"

namespace umi {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline ordered_json pose_to_json(const Pose& p) {
  return ordered_json::array({p.translation.x(), p.translation.y(), p.translation.z(),
                              p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z()});
}

inline Pose pose_from_json(const json& j) {
  if (!j.is_array() || j.size() != 7) {
    raise("parse", "pose must be [x,y,z,qw,qx,qy,qz]");
  }
  const Eigen::Quaterniond q(j[3].get<double>(), j[4].get<double>(), j[5].get<double>(),
                             j[6].get<double>());
  if (!std::isfinite(q.squaredNorm()) || std::abs(q.norm() - 1.0) > 1e-3) {
    raise("parse", "pose quaternion is not unit length");
  }
  return Pose(Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>()), q);
}

struct StreamHeader {
  std::string stream_id;
  std::string kind;  // "pose" | "width" | "frame"
  double latency = 0.0;
  double rate_hz = 0.0;
  json extras = json::object();  // frame_id, waveform, ...
};

inline ordered_json header_to_json(const StreamHeader& h) {
  ordered_json j;
  j["stream_id"] = h.stream_id;
  j["kind"] = h.kind;
  j["latency"] = h.latency;
  j["rate"] = h.rate_hz;
  for (const auto& [key, value] : h.extras.items()) j[key] = value;
  return j;
}

inline StreamHeader parse_stream_header(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    raise("parse", std::string("bad stream header: ") + e.what());
  }
  if (!j.is_object() || j.contains("t")) {
    raise("parse", "first line of a stream file must be a header object");
  }
  StreamHeader h;
  h.stream_id = j.value("stream_id", "");
  h.kind = j.value("kind", "");
  h.latency = j.value("latency", 0.0);
  h.rate_hz = j.value("rate", 0.0);
  for (const auto& [key, value] : j.items()) {
    if (key != "stream_id" && key != "kind" && key != "latency" && key != "rate") {
      h.extras[key] = value;
    }
  }
  return h;
}

namespace detail {

inline void write_sample_line(std::ostream& os, double t, const char* key, const json& value) {
  ordered_json j;
  j["t"] = t;
  j[key] = value;
  os << j.dump() << "\n";
}

template <typename T, typename ToJson>
void write_stream_impl(std::ostream& os, const TimedStream<T>& stream, const char* kind,
                       const json& extras, ToJson to_json_fn) {
  StreamHeader h{stream.stream_id, kind, stream.latency, stream.rate_hz, extras};
  os << header_to_json(h).dump() << "\n";
  for (const auto& s : stream.samples) {
    write_sample_line(os, s.t, kind, to_json_fn(s.value));
  }
}

template <typename T, typename FromJson>
TimedStream<T> read_stream_impl(std::istream& is, const char* kind, StreamHeader* header_out,
                                FromJson from_json_fn) {
  std::string line;
  if (!std::getline(is, line)) raise("parse", "empty stream file");
  const StreamHeader h = parse_stream_header(line);
  if (!h.kind.empty() && h.kind != kind) {
    raise("parse", "expected a " + std::string(kind) + " stream, found kind '" + h.kind + "'");
  }
  TimedStream<T> stream;
  stream.stream_id = h.stream_id;
  stream.latency = h.latency;
  stream.rate_hz = h.rate_hz;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      raise("parse", "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("t") || !j.contains(kind)) {
      raise("parse", "line " + std::to_string(line_no) + ": expected {\"t\", \"" +
                         std::string(kind) + "\"}");
    }
    stream.samples.push_back({j["t"].get<double>(), from_json_fn(j[kind])});
  }
  stream.validate();
  if (header_out) *header_out = h;
  return stream;
}

}  // namespace detail

inline void write_pose_stream(std::ostream& os, const TimedStream<Pose>& stream,
                              const std::string& frame_id) {
  json extras;
  extras["frame_id"] = frame_id;
  detail::write_stream_impl(os, stream, "pose", extras, pose_to_json);
}

inline void write_width_stream(std::ostream& os, const TimedStream<double>& stream,
                               const json& extras = json::object()) {
  detail::write_stream_impl(os, stream, "width", extras,
                            [](double w) { return json(w); });
}

inline void write_frame_stream(std::ostream& os, const TimedStream<FrameRef>& stream) {
  detail::write_stream_impl(os, stream, "frame", json::object(),
                            [](const FrameRef& f) { return json(f); });
}

inline TimedStream<Pose> read_pose_stream(std::istream& is, StreamHeader* header = nullptr) {
  return detail::read_stream_impl<Pose>(is, "pose", header, pose_from_json);
}

inline TimedStream<double> read_width_stream(std::istream& is, StreamHeader* header = nullptr) {
  return detail::read_stream_impl<double>(is, "width", header,
                                          [](const json& j) { return j.get<double>(); });
}

inline TimedStream<FrameRef> read_frame_stream(std::istream& is, StreamHeader* header = nullptr) {
  return detail::read_stream_impl<FrameRef>(is, "frame", header,
                                            [](const json& j) { return j.get<FrameRef>(); });
}

// File-path conveniences. All readers throw Error("io") when the file cannot
// be opened.

inline std::ifstream open_input(const std::string& path) {
  std::ifstream f(path);
  if (!f) raise("io", "cannot open " + path);
  return f;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream f(path);
  if (!f) raise("io", "cannot write " + path);
  return f;
}

inline TimedStream<Pose> read_pose_stream_file(const std::string& path,
                                               StreamHeader* header = nullptr) {
  auto f = open_input(path);
  return read_pose_stream(f, header);
}

inline TimedStream<double> read_width_stream_file(const std::string& path,
                                                  StreamHeader* header = nullptr) {
  auto f = open_input(path);
  return read_width_stream(f, header);
}

inline TimedStream<FrameRef> read_frame_stream_file(const std::string& path,
                                                    StreamHeader* header = nullptr) {
  auto f = open_input(path);
  return read_frame_stream(f, header);
}

// Reads a trajectory from a pose-stream file; frame_id comes from the header.
inline PoseTrajectory read_trajectory_file(const std::string& path) {
  StreamHeader h;
  const TimedStream<Pose> stream = read_pose_stream_file(path, &h);
  return to_trajectory(stream, h.extras.value("frame_id", ""));
}

inline void write_trajectory_file(const std::string& path, const PoseTrajectory& traj,
                                  const std::string& stream_id, double latency = 0.0) {
  auto f = open_output(path);
  write_pose_stream(f, to_stream(traj, stream_id, latency), traj.frame_id);
}

}  // namespace umi
