#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "umi/error.hpp"
#include "umi/latency.hpp"
#include "umi/se3.hpp"
#include "umi/stream.hpp"

namespace umi {

/** One synchronized observation: a frame anchor plus proprioception history.
 *
 * t_obs is the frame's capture timestamp. ee_history is in relative form
 * (anchored at the current pose, last element identity); width_history holds
 * (capture time, meters). All member timestamps are <= t_obs.
 */
struct ObservationTuple {
  double t_obs = 0.0;
  FrameRef frame_ref;
  PoseTrajectory ee_history;
  std::vector<TimedSample<double>> width_history;

  void validate() const {
    for (const auto& s : ee_history.samples) {
      if (s.t > t_obs + 1e-12) raise("bad_argument", "observation history after t_obs");
    }
    for (const auto& s : width_history) {
      if (s.t > t_obs + 1e-12) raise("bad_argument", "observation history after t_obs");
    }
    if (!ee_history.empty() &&
        !approx_equal(ee_history.samples.back().pose, Pose::identity(), 1e-9)) {
      raise("bad_argument", "relative ee history must end at the identity");
    }
  }
};

/** Keep a subset of frames approximating the target rate.
 *
 * Greedy selection: each kept frame is the one nearest to the previous kept
 * frame's timestamp plus 1/target_hz, so inter-sample spacing stays within
 * half a native frame period of the ideal spacing.
 */
inline TimedStream<FrameRef> downsample_frames(const TimedStream<FrameRef>& frames,
                                               double target_hz) {
  frames.validate();
  if (frames.empty()) raise("empty_input", "downsample_frames: no frames");
  if (target_hz <= 0.0) raise("bad_argument", "downsample_frames: target rate must be positive");

  double native_hz = frames.rate_hz;
  if (native_hz <= 0.0 && frames.size() >= 2) {
    native_hz = static_cast<double>(frames.size() - 1) /
                (frames.samples.back().t - frames.samples.front().t);
  }
  if (native_hz > 0.0 && target_hz > native_hz * (1.0 + 1e-9)) {
    raise("bad_argument", "downsample_frames: target rate above native rate");
  }
  const double half_native = native_hz > 0.0 ? 0.5 / native_hz : 0.0;

  TimedStream<FrameRef> out;
  out.stream_id = frames.stream_id;
  out.latency = frames.latency;
  out.rate_hz = target_hz;
  out.samples.push_back(frames.samples.front());

  const double period = 1.0 / target_hz;
  std::size_t last = 0;
  while (true) {
    const double target = out.samples.back().t + period;
    if (target > frames.samples.back().t + half_native) break;
    // Nearest sample to `target` after the previous pick.
    std::size_t best = last + 1;
    if (best >= frames.size()) break;
    for (std::size_t j = best + 1; j < frames.size(); ++j) {
      if (std::abs(frames.samples[j].t - target) <= std::abs(frames.samples[best].t - target)) {
        best = j;
      } else {
        break;  // timestamps increase, distance only grows from here
      }
    }
    out.samples.push_back(frames.samples[best]);
    last = best;
  }
  return out;
}

struct SkippedObservation {
  double t_obs = 0.0;
  FrameRef frame_ref;
  std::string reason;
};

struct AlignResult {
  std::vector<ObservationTuple> tuples;
  std::vector<SkippedObservation> skipped;
};

/** Align all observation streams to the camera's capture timeline.
 *
 * Frames are downsampled to `freq`; every tuple is anchored at a frame's
 * capture timestamp t_obs = t_recv - camera latency. EE and width histories
 * are sampled at t_obs - k/freq (k = obs_horizon-1 .. 0) in each stream's
 * own capture timeline. Frames whose history is not fully covered by a
 * stream are skipped and reported, never extrapolated.
 *
 * The camera must be the highest-latency stream and the stream latencies
 * must agree with the profile; both are checked, not assumed.
 */
inline AlignResult align_observations(const TimedStream<FrameRef>& frames,
                                      const TimedStream<Pose>& ee_stream,
                                      const TimedStream<double>& width_stream,
                                      const LatencyProfile& profile, std::size_t obs_horizon,
                                      double freq) {
  frames.validate();
  ee_stream.validate();
  width_stream.validate();
  profile.validate();
  if (obs_horizon < 1) raise("bad_argument", "align_observations: obs_horizon must be >= 1");
  if (freq <= 0.0) raise("bad_argument", "align_observations: freq must be positive");
  if (frames.latency < ee_stream.latency || frames.latency < width_stream.latency) {
    raise("camera_not_max",
          "align_observations: camera must be the highest-latency stream (camera " +
              std::to_string(frames.latency) + " s, ee " + std::to_string(ee_stream.latency) +
              " s, width " + std::to_string(width_stream.latency) + " s)");
  }
  if (std::abs(frames.latency - profile.l_camera) > 1e-9 ||
      std::abs(ee_stream.latency - profile.l_proprio) > 1e-9) {
    raise("latency_mismatch",
          "align_observations: stream latencies disagree with the latency profile");
  }

  const TimedStream<FrameRef> anchor_frames = downsample_frames(frames, freq);
  AlignResult result;
  for (const auto& frame : anchor_frames.samples) {
    const double t_obs = frame.t - frames.latency;
    bool ok = true;
    std::string reason;
    for (std::size_t k = 0; k < obs_horizon && ok; ++k) {
      const double t = t_obs - static_cast<double>(k) / freq;
      if (!covers(ee_stream, t)) {
        ok = false;
        reason = "ee stream does not cover t=" + std::to_string(t);
      } else if (!covers(width_stream, t)) {
        ok = false;
        reason = "width stream does not cover t=" + std::to_string(t);
      }
    }
    if (!ok) {
      result.skipped.push_back({t_obs, frame.value, reason});
      continue;
    }

    ObservationTuple tuple;
    tuple.t_obs = t_obs;
    tuple.frame_ref = frame.value;
    PoseTrajectory history;
    history.frame_id = "map";
    for (std::size_t k = obs_horizon; k-- > 0;) {  // oldest first
      const double t = t_obs - static_cast<double>(k) / freq;
      history.samples.push_back({t, sample_at(ee_stream, t)});
      tuple.width_history.push_back({t, sample_at(width_stream, t)});
    }
    tuple.ee_history = relative_proprioception(history);
    result.tuples.push_back(std::move(tuple));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Bimanual soft sync.

struct FramePair {
  double t_left = 0.0;
  double t_right = 0.0;
  FrameRef left;
  FrameRef right;
  double offset = 0.0;  // |t_left - t_right|
};

struct SoftSyncResult {
  std::vector<FramePair> pairs;
  std::vector<FramePair> rejected;  // mutual pairs beyond the offset bound
};

// GoPro clocks are QR-synchronized to within one frame at 60 Hz, so that is
// the default acceptance bound.
inline constexpr double kSoftSyncMaxOffset = 1.0 / 60.0;

/** Pair frames from two cameras by mutually nearest timestamps.
 *
 * A pair is kept only when each frame is the other's nearest neighbor, which
 * makes the pairing symmetric in its inputs. Mutual pairs with offset above
 * `max_offset` are reported in `rejected`.
 */
inline SoftSyncResult soft_sync_bimanual(const TimedStream<FrameRef>& frames_left,
                                         const TimedStream<FrameRef>& frames_right,
                                         double max_offset = kSoftSyncMaxOffset) {
  frames_left.validate();
  frames_right.validate();
  if (frames_left.empty() || frames_right.empty()) {
    raise("empty_input", "soft_sync_bimanual: both streams must be non-empty");
  }

  const auto nearest = [](const TimedStream<FrameRef>& stream, double t) {
    std::size_t lo = 0, hi = stream.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (stream.samples[mid].t < t) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    if (lo > 0 && std::abs(stream.samples[lo - 1].t - t) <= std::abs(stream.samples[lo].t - t)) {
      return lo - 1;
    }
    return lo;
  };

  SoftSyncResult result;
  for (std::size_t i = 0; i < frames_left.size(); ++i) {
    const double tl = frames_left.samples[i].t;
    const std::size_t j = nearest(frames_right, tl);
    const double tr = frames_right.samples[j].t;
    if (nearest(frames_left, tr) != i) continue;  // not mutual
    FramePair pair{tl, tr, frames_left.samples[i].value, frames_right.samples[j].value,
                   std::abs(tl - tr)};
    if (pair.offset <= max_offset + 1e-12) {
      result.pairs.push_back(std::move(pair));
    } else {
      result.rejected.push_back(std::move(pair));
    }
  }
  return result;
}

}  // namespace umi
