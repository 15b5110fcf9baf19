#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "umi/error.hpp"
#include "umi/scheduler.hpp"
#include "umi/se3.hpp"
#include "umi/stream.hpp"

namespace umi {

// ---------------------------------------------------------------------------
// Session layout.

enum class RecordingRole { Mapping, Calibration, Demo };

inline const char* to_string(RecordingRole r) {
  switch (r) {
    case RecordingRole::Mapping: return "mapping";
    case RecordingRole::Calibration: return "calibration";
    case RecordingRole::Demo: return "demo";
  }
  return "unknown";
}

inline RecordingRole recording_role_from_string(const std::string& s) {
  if (s == "mapping") return RecordingRole::Mapping;
  if (s == "calibration") return RecordingRole::Calibration;
  if (s == "demo") return RecordingRole::Demo;
  raise("bad_argument", "unknown recording role: " + s);
}

struct Recording {
  std::string file;  // path relative to the scene directory
  std::string serial;
  RecordingRole role = RecordingRole::Demo;
  // Recording span on the shared clock; filled in during ingestion.
  double t_start = 0.0;
  double t_end = 0.0;
};

/** One scene folder: a single mapping recording plus per-gripper calibration
 * and demo recordings, all relocalized into map_frame_id. */
struct SessionManifest {
  std::string scene_id;
  std::vector<std::string> gripper_serials;
  std::string map_frame_id;
  std::vector<Recording> recordings;

  void validate() const {
    std::size_t mapping_count = 0;
    for (const Recording& r : recordings) {
      if (r.role == RecordingRole::Mapping) ++mapping_count;
    }
    if (mapping_count != 1) {
      raise("bad_argument", "scene '" + scene_id + "': expected exactly one mapping recording, found " +
                                std::to_string(mapping_count));
    }
    for (std::size_t i = 0; i < gripper_serials.size(); ++i) {
      for (std::size_t j = i + 1; j < gripper_serials.size(); ++j) {
        if (gripper_serials[i] == gripper_serials[j]) {
          raise("bad_argument", "scene '" + scene_id + "': duplicate gripper serial " +
                                    gripper_serials[i]);
        }
      }
    }
    for (const Recording& r : recordings) {
      if (r.role == RecordingRole::Mapping) continue;
      if (std::find(gripper_serials.begin(), gripper_serials.end(), r.serial) ==
          gripper_serials.end()) {
        raise("bad_argument", "scene '" + scene_id + "': recording " + r.file +
                                  " references unknown serial " + r.serial);
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Gripper calibration.

struct GripperCalibration {
  std::string serial;
  double width_min = 0.0;  // meters
  double width_max = kGripperStroke;

  void validate() const {
    if (!(width_min >= 0.0 && width_min < width_max && width_max <= kGripperStroke)) {
      raise("bad_argument", "gripper calibration outside [0, stroke]: serial " + serial);
    }
  }
};

namespace detail {

// Extreme value at sample `apex` refined by intersecting least-squares lines
// through the flanks on both sides. Exact for piecewise-linear open/close
// ramps and unbiased under sensor noise, unlike the raw argmax sample, whose
// value is selected for its luckiest noise draw.
inline double refine_extreme(const TimedStream<double>& rec, std::size_t apex, double fallback_band) {
  constexpr std::size_t kFlank = 8;
  const auto fit = [&](std::size_t first, std::size_t last, double* a, double* b) {
    // v = a + b * t over samples [first, last]
    double st = 0, sv = 0, stt = 0, stv = 0;
    const double n = static_cast<double>(last - first + 1);
    if (last - first + 1 < 2) return false;
    for (std::size_t i = first; i <= last; ++i) {
      st += rec.samples[i].t;
      sv += rec.samples[i].value;
      stt += rec.samples[i].t * rec.samples[i].t;
      stv += rec.samples[i].t * rec.samples[i].value;
    }
    const double den = n * stt - st * st;
    if (std::abs(den) < 1e-15) return false;
    *b = (n * stv - st * sv) / den;
    *a = (sv - *b * st) / n;
    return true;
  };
  const double pointwise = rec.samples[apex].value;
  if (apex < 2 || apex + 2 >= rec.size()) return pointwise;
  const std::size_t l0 = apex >= kFlank ? apex - kFlank : 0;
  const std::size_t r1 = std::min(rec.size() - 1, apex + kFlank);
  double a1, b1, a2, b2;
  if (!fit(l0, apex - 1, &a1, &b1) || !fit(apex + 1, r1, &a2, &b2) ||
      std::abs(b1 - b2) < 1e-12) {
    return pointwise;
  }
  const double t_star = (a2 - a1) / (b1 - b2);
  const double v_star = a1 + b1 * t_star;
  // Reject wild extrapolations (plateaus, direction changes inside the flank).
  if (std::abs(v_star - pointwise) > fallback_band) return pointwise;
  return v_star;
}

}  // namespace detail

/** Recover finger-stroke bounds from an open/close calibration recording.
 *
 * Extremes are detected with a hysteresis of a quarter of the observed range,
 * so sensor noise does not mint extra cycles, and each extreme is refined by
 * a two-flank line fit. Needs at least 5 full cycles; the bounds are medians
 * of the surviving extremes.
 */
inline GripperCalibration calibrate_gripper(const TimedStream<double>& recording,
                                            std::size_t min_cycles = 5) {
  recording.validate();
  if (recording.size() < 2 * min_cycles) {
    raise("calibration_insufficient", "calibrate_gripper: too few samples");
  }
  double global_min = recording.samples[0].value, global_max = global_min;
  for (const auto& s : recording.samples) {
    global_min = std::min(global_min, s.value);
    global_max = std::max(global_max, s.value);
  }
  const double prominence = 0.25 * (global_max - global_min);
  if (prominence <= 0.0) {
    raise("calibration_insufficient", "calibrate_gripper: flat recording");
  }

  std::vector<double> maxima, minima;
  double hi = recording.samples[0].value, lo = hi;
  std::size_t hi_i = 0, lo_i = 0;
  int mode = 0;  // +1 rising, -1 falling, 0 undecided
  for (std::size_t k = 0; k < recording.size(); ++k) {
    const double v = recording.samples[k].value;
    if (v >= hi) {
      hi = v;
      hi_i = k;
    }
    if (v <= lo) {
      lo = v;
      lo_i = k;
    }
    if (mode != -1 && hi - v >= prominence) {
      maxima.push_back(detail::refine_extreme(recording, hi_i, 0.25 * prominence));
      mode = -1;
      lo = v;
      lo_i = k;
    } else if (mode != +1 && v - lo >= prominence) {
      minima.push_back(detail::refine_extreme(recording, lo_i, 0.25 * prominence));
      mode = +1;
      hi = v;
      hi_i = k;
    }
  }
  if (maxima.size() < min_cycles || minima.size() < min_cycles) {
    raise("calibration_insufficient",
          "calibrate_gripper: found " + std::to_string(minima.size()) + " open / " +
              std::to_string(maxima.size()) + " close extremes, need " +
              std::to_string(min_cycles) + " cycles");
  }
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  GripperCalibration cal;
  cal.width_min = median(minima);
  cal.width_max = median(maxima);
  cal.validate();
  return cal;
}

// ---------------------------------------------------------------------------
// Marker-based width.

// Affine map from marker pixel distance to finger width.
struct PixelToMeter {
  double scale_m_per_px = 0.0001;
  double offset_m = 0.0;
};

struct WidthSample {
  double width = 0.0;
  bool clamped = false;
};

/** Finger width from the two fiducial marker centers; the result is clamped
 * to the physical stroke and the clamp is reported so callers can log it. */
inline WidthSample width_from_markers(const Eigen::Vector2d& left_px,
                                      const Eigen::Vector2d& right_px, const PixelToMeter& cal) {
  const double raw = cal.scale_m_per_px * (left_px - right_px).norm() + cal.offset_m;
  WidthSample out;
  out.width = std::clamp(raw, 0.0, kGripperStroke);
  out.clamped = raw != out.width;
  return out;
}

// ---------------------------------------------------------------------------
// Bimanual pairing.

struct RecordingPair {
  Recording left;
  Recording right;
  double overlap = 0.0;  // seconds
};

struct PairingResult {
  std::vector<RecordingPair> pairs;
  std::vector<Recording> unpaired;
};

// Overlap in seconds of two recording spans.
inline double recording_overlap(const Recording& a, const Recording& b) {
  return std::max(0.0, std::min(a.t_end, b.t_end) - std::max(a.t_start, b.t_start));
}

/** Pair demo recordings of the two serials by maximal temporal overlap.
 *
 * Left/right identity comes from the declared serial order in the manifest.
 * A near-tie (best and runner-up overlap within 1 s) cannot be resolved
 * automatically and raises ambiguous_pairing. Recordings with no overlapping
 * counterpart are reported unpaired.
 */
inline PairingResult pair_bimanual(const SessionManifest& manifest) {
  manifest.validate();
  if (manifest.gripper_serials.size() != 2) {
    raise("bad_argument", "pair_bimanual: scene must declare exactly two gripper serials");
  }
  const std::string& left_serial = manifest.gripper_serials[0];
  std::vector<Recording> left, right;
  for (const Recording& r : manifest.recordings) {
    if (r.role != RecordingRole::Demo) continue;
    (r.serial == left_serial ? left : right).push_back(r);
  }

  struct Candidate {
    std::size_t i, j;
    double overlap;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < left.size(); ++i) {
    for (std::size_t j = 0; j < right.size(); ++j) {
      const double ov = recording_overlap(left[i], right[j]);
      if (ov > 0.0) candidates.push_back({i, j, ov});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.overlap > b.overlap;
  });

  std::vector<bool> left_used(left.size(), false), right_used(right.size(), false);
  PairingResult result;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const Candidate& c = candidates[k];
    if (left_used[c.i] || right_used[c.j]) continue;
    // Runner-up still available for either side within 1 s of overlap means
    // the assignment is ambiguous.
    for (std::size_t m = k + 1; m < candidates.size(); ++m) {
      const Candidate& other = candidates[m];
      if (left_used[other.i] || right_used[other.j]) continue;
      const bool shares = other.i == c.i || other.j == c.j;
      if (shares && !(other.i == c.i && other.j == c.j) && c.overlap - other.overlap < 1.0) {
        raise("ambiguous_pairing", "pair_bimanual: " + left[c.i].file + " / " + right[c.j].file +
                                       " vs " + left[other.i].file + " / " + right[other.j].file +
                                       " overlap difference below 1 s");
      }
    }
    left_used[c.i] = true;
    right_used[c.j] = true;
    result.pairs.push_back({left[c.i], right[c.j], c.overlap});
  }
  for (std::size_t i = 0; i < left.size(); ++i) {
    if (!left_used[i]) result.unpaired.push_back(left[i]);
  }
  for (std::size_t j = 0; j < right.size(); ++j) {
    if (!right_used[j]) result.unpaired.push_back(right[j]);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Inter-gripper stream.

/** Relative right-in-left pose at every left timestamp the right trajectory
 * covers. Both trajectories must share the map frame. */
inline TimedStream<Pose> inter_gripper_stream(const PoseTrajectory& left,
                                              const PoseTrajectory& right) {
  left.validate();
  right.validate();
  if (left.frame_id != right.frame_id) {
    raise("frame_mismatch", "inter_gripper_stream: '" + left.frame_id + "' vs '" +
                                right.frame_id + "'");
  }
  const TimedStream<Pose> right_stream = to_stream(right, "right");
  TimedStream<Pose> out;
  out.stream_id = "inter_gripper";
  for (const auto& s : left.samples) {
    if (!covers(right_stream, s.t)) continue;
    out.samples.push_back({s.t, inter_gripper_pose(s.pose, sample_at(right_stream, s.t))});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kinematic filtering.

/** Reach/workspace/speed/acceleration limits of a target deployment. */
struct KinematicModel {
  Pose base_pose;
  double reach_min = 0.0;
  double reach_max = 1.0;
  double z_min = -1e9;
  double z_max = 1e9;
  double v_max = 2.0;  // m/s
  double a_max = 20.0; // m/s^2

  void validate() const {
    if (!(reach_min < reach_max) || !(z_min < z_max) || !(v_max > 0.0) || !(a_max > 0.0)) {
      raise("bad_argument", "kinematic model: inconsistent limits");
    }
  }
};

struct EpisodeArm {
  std::string serial;
  PoseTrajectory ee;            // map frame
  TimedStream<double> width;
  std::string source_file;
};

struct Episode {
  std::string id;
  std::string scene_id;
  std::string map_frame_id;
  std::vector<EpisodeArm> arms;  // one or two
  std::string verdict = "pending";  // "pending" | "accepted" | "rejected"
  std::string verdict_reason;       // constraint code when rejected

  bool bimanual() const { return arms.size() == 2; }

  void validate() const {
    if (arms.empty() || arms.size() > 2) raise("bad_argument", "episode needs 1 or 2 arms");
    for (const EpisodeArm& arm : arms) {
      if (arm.ee.frame_id != map_frame_id) {
        raise("frame_mismatch", "episode " + id + ": arm " + arm.serial +
                                    " not in the map frame");
      }
    }
  }
};

struct FilterVerdict {
  bool accepted = true;
  std::string code;    // reach | z_bounds | speed | acceleration | insufficient_data
  std::string detail;  // human-readable description of the first violation
};

/** Check every sample of every arm against the model limits.
 *
 * Violations are reported as the first one encountered scanning samples in
 * time order, testing reach, z bounds, speed, then acceleration at each
 * sample. Speed and acceleration use central differences, so trajectories
 * shorter than 3 samples cannot be evaluated and are rejected.
 */
inline FilterVerdict kinematic_filter(const Episode& episode,
                                      const std::vector<KinematicModel>& models) {
  episode.validate();
  if (models.size() != 1 && models.size() != episode.arms.size()) {
    raise("bad_argument", "kinematic_filter: need one model or one per arm");
  }
  for (const KinematicModel& m : models) m.validate();

  for (std::size_t a = 0; a < episode.arms.size(); ++a) {
    const EpisodeArm& arm = episode.arms[a];
    const KinematicModel& model = models[models.size() == 1 ? 0 : a];
    const auto& s = arm.ee.samples;
    if (s.size() < 3) {
      return {false, "insufficient_data",
              "arm " + arm.serial + ": fewer than 3 samples, acceleration not evaluable"};
    }
    const Eigen::Vector3d base = model.base_pose.translation;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const Eigen::Vector3d& p = s[k].pose.translation;
      const double reach = (p - base).norm();
      if (reach < model.reach_min || reach > model.reach_max) {
        return {false, "reach",
                "arm " + arm.serial + " at t=" + std::to_string(s[k].t) + ": reach " +
                    std::to_string(reach) + " m outside [" + std::to_string(model.reach_min) +
                    ", " + std::to_string(model.reach_max) + "]"};
      }
      if (p.z() < model.z_min || p.z() > model.z_max) {
        return {false, "z_bounds",
                "arm " + arm.serial + " at t=" + std::to_string(s[k].t) + ": z " +
                    std::to_string(p.z()) + " m outside bounds"};
      }
      if (k == 0 || k + 1 >= s.size()) continue;
      const double dt0 = s[k].t - s[k - 1].t;
      const double dt1 = s[k + 1].t - s[k].t;
      const Eigen::Vector3d v =
          (s[k + 1].pose.translation - s[k - 1].pose.translation) / (dt0 + dt1);
      if (v.norm() > model.v_max) {
        return {false, "speed",
                "arm " + arm.serial + " at t=" + std::to_string(s[k].t) + ": speed " +
                    std::to_string(v.norm()) + " m/s over " + std::to_string(model.v_max)};
      }
      const Eigen::Vector3d acc = 2.0 *
                                  ((s[k + 1].pose.translation - s[k].pose.translation) / dt1 -
                                   (s[k].pose.translation - s[k - 1].pose.translation) / dt0) /
                                  (dt0 + dt1);
      if (acc.norm() > model.a_max) {
        return {false, "acceleration",
                "arm " + arm.serial + " at t=" + std::to_string(s[k].t) + ": acceleration " +
                    std::to_string(acc.norm()) + " m/s^2 over " + std::to_string(model.a_max)};
      }
    }
  }
  return {true, "", ""};
}

inline FilterVerdict kinematic_filter(const Episode& episode, const KinematicModel& model) {
  return kinematic_filter(episode, std::vector<KinematicModel>{model});
}

}  // namespace umi
