#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "umi/error.hpp"
#include "umi/se3.hpp"

namespace umi {

// Opaque reference to a captured frame (file name, index, ...). Pixel
// contents never flow through the sync layer.
using FrameRef = std::string;

template <typename T>
struct TimedSample {
  double t = 0.0;  // receive timestamp, seconds on the shared clock
  T value{};
};

/** Strictly time-ordered samples with a declared stream latency.
 *
 * `latency` is the delay between physical capture and availability:
 * capture time = receive time - latency. All cross-stream alignment happens
 * in capture time.
 */
template <typename T>
struct TimedStream {
  std::vector<TimedSample<T>> samples;
  double latency = 0.0;  // seconds, >= 0
  std::string stream_id;
  double rate_hz = 0.0;  // declared native rate; 0 when unknown

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  double capture_time(std::size_t i) const { return samples[i].t - latency; }
  double first_capture_time() const { return samples.front().t - latency; }
  double last_capture_time() const { return samples.back().t - latency; }

  void validate() const {
    if (!(latency >= 0.0) || !std::isfinite(latency)) {
      raise("bad_argument", "stream '" + stream_id + "': latency must be finite and >= 0");
    }
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (!(samples[i].t > samples[i - 1].t)) {
        raise("bad_argument", "stream '" + stream_id + "': timestamps must be strictly increasing");
      }
    }
  }
};

namespace detail {

inline double interpolate_value(double a, double b, double alpha) {
  return a + alpha * (b - a);
}

inline Pose interpolate_value(const Pose& a, const Pose& b, double alpha) {
  return interpolate_pose(a, b, alpha);
}

}  // namespace detail

/** Sample a stream at capture time t.
 *
 * Exact sample when t hits a node; linear (scalar) or lerp+slerp (pose)
 * between neighbors. Requests outside the covered capture interval raise
 * out_of_range -- boundaries are never silently clamped.
 */
template <typename T>
T sample_at(const TimedStream<T>& stream, double t) {
  if (stream.empty()) raise("empty_input", "sample_at: stream '" + stream.stream_id + "' is empty");
  const double t_recv = t + stream.latency;  // back to the receive timeline
  const auto& s = stream.samples;
  if (t_recv < s.front().t || t_recv > s.back().t) {
    raise("out_of_range", "sample_at: t=" + std::to_string(t) + " outside coverage of stream '" +
                              stream.stream_id + "'");
  }
  // First sample with timestamp >= t_recv.
  std::size_t lo = 0, hi = s.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (s[mid].t < t_recv) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (s[lo].t == t_recv) return s[lo].value;
  const TimedSample<T>& b = s[lo];
  const TimedSample<T>& a = s[lo - 1];
  const double alpha = (t_recv - a.t) / (b.t - a.t);
  return detail::interpolate_value(a.value, b.value, alpha);
}

template <typename T>
bool covers(const TimedStream<T>& stream, double t) {
  if (stream.empty()) return false;
  const double t_recv = t + stream.latency;
  return t_recv >= stream.samples.front().t && t_recv <= stream.samples.back().t;
}

inline PoseTrajectory to_trajectory(const TimedStream<Pose>& stream, const std::string& frame_id) {
  PoseTrajectory traj;
  traj.frame_id = frame_id;
  traj.samples.reserve(stream.size());
  for (const auto& s : stream.samples) traj.samples.push_back({s.t, s.value});
  return traj;
}

inline TimedStream<Pose> to_stream(const PoseTrajectory& traj, const std::string& stream_id,
                                   double latency = 0.0) {
  TimedStream<Pose> stream;
  stream.stream_id = stream_id;
  stream.latency = latency;
  stream.samples.reserve(traj.size());
  for (const auto& s : traj.samples) stream.samples.push_back({s.t, s.pose});
  return stream;
}

}  // namespace umi
