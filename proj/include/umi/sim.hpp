#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "umi/error.hpp"
#include "umi/latency.hpp"
#include "umi/scheduler.hpp"
#include "umi/se3.hpp"
#include "umi/stream.hpp"

namespace umi {

/** Closed-loop deployment simulation parameters.
 *
 * `profile` holds the true hardware latencies; `assumed_profile` is what the
 * observation pipeline and scheduler believe. Setting the assumed profile to
 * all zeros ablates latency matching while the physics stays the same.
 * The default latencies used by the CLI configs are plausible placeholders
 * for a streaming-camera + industrial-arm deployment, not measurements of
 * any specific rig.
 */
struct SimConfig {
  LatencyProfile profile;
  LatencyProfile assumed_profile;
  double freq = 20.0;             // policy rate, Hz (10 or 20 in practice)
  double inference_delay = 0.01;  // seconds
  double tracker_tau = 0.03;      // first-order actuator time constant
  std::uint64_t seed = 0;

  // Loop internals; defaults keep every event on the 1 ms tick grid.
  double tick = 0.001;
  double camera_hz = 50.0;
  double proprio_hz = 250.0;
  std::size_t obs_horizon = 2;
  std::size_t action_horizon = 6;
  double misalignment_max_lag = 0.6;

  void validate() const {
    profile.validate();
    assumed_profile.validate();
    if (!(freq > 0.0) || !(tick > 0.0) || !(camera_hz > 0.0) || !(proprio_hz > 0.0)) {
      raise("bad_argument", "sim config: rates must be positive");
    }
    if (!(tracker_tau > 0.0)) raise("unstable_tracker", "sim config: tracker_tau must be > 0");
    if (inference_delay < 0.0) raise("bad_argument", "sim config: negative inference delay");
    if (action_horizon < 1 || obs_horizon < 1) {
      raise("bad_argument", "sim config: horizons must be >= 1");
    }
  }
};

/** Outcome metrics of one simulated run.
 *
 * temporal_misalignment and release_time_error are measured on command
 * effects (setpoint arrival at the actuator after its true transport delay),
 * which isolates the scheduling error the latency matching is supposed to
 * remove; tracker smoothing shows up in tracking_rmse and jerk_mean instead.
 */
struct SimReport {
  double temporal_misalignment = 0.0;  // s, lag between desired and executed EE motion
  double tracking_rmse = 0.0;          // m, achieved vs reference position
  double release_time_error = 0.0;     // s, |gripper release - robot release|
  double jerk_mean = 0.0;              // m/s^3, achieved-motion smoothness proxy
  double robot_release_time = 0.0;
  double gripper_release_time = 0.0;
  double reference_release_time = 0.0;
  std::size_t chunks_emitted = 0;
  std::size_t commands_sent = 0;
  std::size_t reinference_events = 0;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Toss reference profile.

struct TossParams {
  double travel = 0.8;        // m along +x
  double peak_speed = 1.6;    // m/s, reached at release
  double hold = 1.2;          // s of stillness before and after the ramp
  double height = 0.3;        // m above the floor (z)
  double width_closed = 0.01; // m
  double width_open = 0.06;   // m
  double sample_rate = 200.0; // Hz of the emitted reference
};

struct TossProfile {
  PoseTrajectory trajectory;
  TimedStream<double> width;
  double release_time = 0.0;
  Eigen::Vector3d release_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d release_velocity = Eigen::Vector3d::Zero();
};

/** Analytic accelerate-and-release reference: a cosine ramp covering
 * `travel` meters whose speed peaks exactly at the release instant, where
 * the width steps open. Deterministic; duration = 2*hold + ramp. */
inline TossProfile toss_profile(const TossParams& p) {
  if (!(p.travel > 0.0) || !(p.peak_speed > 0.0) || !(p.hold >= 0.0) || !(p.sample_rate > 0.0) ||
      !(p.width_open > p.width_closed) || p.width_open > kGripperStroke || p.width_closed < 0.0) {
    raise("bad_argument", "toss_profile: inconsistent parameters");
  }
  // x(t) = travel/2 * (1 - cos(pi*s/T)); peak speed travel*pi/(2T) at s=T/2.
  const double ramp = p.travel * M_PI / (2.0 * p.peak_speed);
  const double duration = 2.0 * p.hold + ramp;
  TossProfile out;
  out.trajectory.frame_id = "sim";
  out.release_time = p.hold + 0.5 * ramp;
  out.release_position = Eigen::Vector3d(0.5 * p.travel, 0.0, p.height);
  out.release_velocity = Eigen::Vector3d(p.peak_speed, 0.0, 0.0);

  const std::size_t n = static_cast<std::size_t>(std::floor(duration * p.sample_rate)) + 1;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / p.sample_rate;
    double x = 0.0;
    if (t >= p.hold && t <= p.hold + ramp) {
      x = 0.5 * p.travel * (1.0 - std::cos(M_PI * (t - p.hold) / ramp));
    } else if (t > p.hold + ramp) {
      x = p.travel;
    }
    out.trajectory.samples.push_back({t, Pose::from_translation(x, 0.0, p.height)});
    out.width.samples.push_back({t, t < out.release_time ? p.width_closed : p.width_open});
  }
  out.width.stream_id = "toss:width";
  return out;
}

/** Horizontal range of a ballistic projectile released at `pos` with
 * velocity `vel`, landing on the plane z = floor_z. */
inline double projectile_range(const Eigen::Vector3d& pos, const Eigen::Vector3d& vel,
                               double floor_z, double gravity = 9.80665) {
  const double h = pos.z() - floor_z;
  if (h < 0.0) raise("bad_argument", "projectile_range: release below the floor");
  // z(t) = h + vz t - g t^2 / 2 = 0
  const double disc = vel.z() * vel.z() + 2.0 * gravity * h;
  const double t_fall = (vel.z() + std::sqrt(disc)) / gravity;
  return std::hypot(vel.x(), vel.y()) * t_fall;
}

// ---------------------------------------------------------------------------
// Deterministic closed-loop simulation.

namespace detail {

// First crossing of `threshold` from below, on a piecewise-constant signal.
inline double first_upward_crossing(const std::vector<TimedSample<double>>& samples,
                                    double threshold, double fallback) {
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (samples[k].value >= threshold - 1e-12) {
      return samples[k].t;
    }
  }
  return fallback;
}

}  // namespace detail

/** Run the deployment loop against a reference demonstration.
 *
 * Fixed 1 ms ticks. Sensors publish with the true latencies; a replay policy
 * stands in for the learned one: it reads the frame content (which encodes
 * the true capture time), predicts the next action_horizon reference poses
 * and widths, and anchors them relative to the proprioception it was handed.
 * The scheduler trims and dispatches with the assumed profile; actuators are
 * a transport delay (true execution latency) followed by a first-order
 * tracker. Bit-reproducible for a given config.
 */
inline SimReport simulate(const PoseTrajectory& reference, const TimedStream<double>& width_profile,
                          const SimConfig& cfg, std::vector<Command>* dispatch_log = nullptr) {
  cfg.validate();
  reference.validate();
  width_profile.validate();
  if (reference.size() < 2 || width_profile.empty()) {
    raise("bad_argument", "simulate: reference must have samples");
  }
  const double t_ref0 = reference.samples.front().t;
  const double t_ref1 = reference.samples.back().t;
  if (t_ref1 - t_ref0 < 3.0) {
    raise("reference_too_short", "simulate: reference must cover at least 3 seconds");
  }
  double w_lo = width_profile.samples.front().value, w_hi = w_lo;
  for (const auto& s : width_profile.samples) {
    w_lo = std::min(w_lo, s.value);
    w_hi = std::max(w_hi, s.value);
  }
  if (w_hi - w_lo <= 0.0) {
    raise("bad_argument", "simulate: width profile has no release event");
  }
  const double release_threshold = 0.5 * (w_lo + w_hi);

  const TimedStream<Pose> ref_stream = to_stream(reference, "reference");
  const auto ref_at = [&](double t) {
    return sample_at(ref_stream, std::clamp(t, t_ref0, t_ref1));
  };
  const auto ref_width_at = [&](double t) {
    double tc = std::clamp(t, width_profile.samples.front().t, width_profile.samples.back().t);
    return sample_at(width_profile, tc);
  };

  // Reference release data: first upward width crossing and the coordinate
  // along the dominant travel direction at that moment.
  double t_release_ref = t_ref1;
  for (std::size_t k = 1; k < width_profile.size(); ++k) {
    if (width_profile.samples[k - 1].value < release_threshold &&
        width_profile.samples[k].value >= release_threshold) {
      t_release_ref = width_profile.samples[k].t;
      break;
    }
  }
  Eigen::Vector3d dir =
      reference.samples.back().pose.translation - reference.samples.front().pose.translation;
  if (dir.norm() < 1e-9) dir = Eigen::Vector3d::UnitX();
  dir.normalize();
  const double release_coord = dir.dot(ref_at(t_release_ref).translation);

  // --- state ---------------------------------------------------------------
  const double tick = cfg.tick;
  const double t_end = t_ref1 + cfg.misalignment_max_lag + 0.15;
  const double policy_dt = 1.0 / cfg.freq;

  struct PendingFrame {
    double t_arrive;
    double t_capture;
  };
  std::deque<PendingFrame> frame_queue;
  double next_capture = t_ref0;

  TimedStream<Pose> proprio_received;  // receive timestamps; believed capture = t - assumed
  proprio_received.stream_id = "proprio";
  proprio_received.latency = cfg.assumed_profile.l_proprio;
  double next_proprio = t_ref0;

  struct PendingChunk {
    double t_done;
    ActionChunk chunk;  // absolute poses, already composed with the anchor
  };
  std::deque<PendingChunk> inference_queue;
  double next_slot = t_ref0 + static_cast<double>(cfg.obs_horizon) * policy_dt;

  Dispatcher dispatcher;

  struct Arrival {
    double t;
    Pose pose;
    double width;
    bool is_robot;
  };
  std::deque<Arrival> robot_transport, gripper_transport;

  Pose robot_pose = reference.samples.front().pose;
  Pose robot_target = robot_pose;
  double gripper_width = width_profile.samples.front().value;
  double gripper_target = gripper_width;
  bool robot_has_target = false;

  // Effective command signals: setpoint value at the instant it reaches the
  // actuator. These expose scheduling misalignment without tracker smoothing.
  PoseTrajectory robot_effects;
  robot_effects.frame_id = reference.frame_id;
  std::vector<TimedSample<double>> gripper_effects;

  std::vector<Eigen::Vector3d> achieved_pos;  // one per tick
  double tracking_sq = 0.0;
  std::size_t tracking_n = 0;

  SimReport report;
  report.seed = cfg.seed;
  report.reference_release_time = t_release_ref;

  const std::size_t n_ticks = static_cast<std::size_t>(std::llround((t_end - t_ref0) / tick));
  for (std::size_t n = 0; n <= n_ticks; ++n) {
    const double t = t_ref0 + static_cast<double>(n) * tick;

    // Sensors.
    while (next_capture <= t + 1e-12 && next_capture <= t_ref1) {
      frame_queue.push_back({next_capture + cfg.profile.l_camera, next_capture});
      next_capture += 1.0 / cfg.camera_hz;
    }
    while (next_proprio <= t + 1e-12) {
      proprio_received.samples.push_back({next_proprio + cfg.profile.l_proprio, robot_pose});
      next_proprio += 1.0 / cfg.proprio_hz;
    }

    // Frame arrivals trigger at most one inference per policy period.
    while (!frame_queue.empty() && frame_queue.front().t_arrive <= t + 1e-12) {
      const PendingFrame frame = frame_queue.front();
      frame_queue.pop_front();
      const double t_obs = frame.t_arrive - cfg.assumed_profile.l_camera;  // believed capture
      if (t_obs < next_slot - 1e-12) continue;
      // History coverage in the believed capture timeline.
      const double oldest = t_obs - static_cast<double>(cfg.obs_horizon - 1) * policy_dt;
      if (!covers(proprio_received, oldest) || !covers(proprio_received, t_obs)) continue;
      next_slot += policy_dt;

      const Pose anchor = sample_at(proprio_received, t_obs);
      ActionChunk chunk;
      chunk.t_obs = t_obs;
      chunk.dt_output = policy_dt;
      const double t_content = frame.t_arrive - cfg.profile.l_camera;  // true capture
      for (std::size_t k = 0; k < cfg.action_horizon; ++k) {
        const double offset = static_cast<double>(k) * policy_dt;
        // Replay policy: reproduce the demonstrated future relative to its
        // current pose; the pipeline recomposes with the same anchor, so
        // the commanded absolute target is the reference pose itself.
        const Pose rel = compose(inverse(anchor), ref_at(t_content + offset));
        chunk.steps.push_back({t_obs + offset, compose(anchor, rel),
                               std::clamp(ref_width_at(t_content + offset), 0.0, kGripperStroke)});
      }
      inference_queue.push_back({frame.t_arrive + cfg.inference_delay, std::move(chunk)});
      ++report.chunks_emitted;
    }

    // Completed inferences: trim with the assumed profile, dispatch.
    while (!inference_queue.empty() && inference_queue.front().t_done <= t + 1e-12) {
      const PendingChunk pending = inference_queue.front();
      inference_queue.pop_front();
      const TrimResult trimmed = trim_outdated(pending.chunk, pending.t_done, cfg.assumed_profile);
      if (trimmed.needs_reinference) {
        ++report.reinference_events;
        continue;
      }
      dispatcher.submit(plan_dispatch(trimmed, cfg.assumed_profile, pending.t_done));
    }

    // Send due commands into the transport delays.
    for (const Command& c : dispatcher.advance(t)) {
      ++report.commands_sent;
      if (dispatch_log) dispatch_log->push_back(c);
      if (c.actuator == Actuator::Robot) {
        robot_transport.push_back({t + cfg.profile.l_robot_exec, c.pose, 0.0, true});
      } else {
        gripper_transport.push_back({t + cfg.profile.l_gripper_exec, Pose(), c.width, false});
      }
    }

    // Deliveries update the current setpoints.
    while (!robot_transport.empty() && robot_transport.front().t <= t + 1e-12) {
      robot_target = robot_transport.front().pose;
      robot_has_target = true;
      if (robot_effects.samples.empty() || robot_effects.samples.back().t < t - 1e-12) {
        robot_effects.samples.push_back({t, robot_target});
      } else {
        robot_effects.samples.back().pose = robot_target;  // same-tick supersede
      }
      robot_transport.pop_front();
    }
    while (!gripper_transport.empty() && gripper_transport.front().t <= t + 1e-12) {
      gripper_target = gripper_transport.front().width;
      gripper_effects.push_back({t, gripper_target});
      gripper_transport.pop_front();
    }

    // First-order trackers.
    const double alpha = 1.0 - std::exp(-tick / cfg.tracker_tau);
    if (robot_has_target) {
      robot_pose = interpolate_pose(robot_pose, robot_target, alpha);
    }
    gripper_width += alpha * (gripper_target - gripper_width);

    achieved_pos.push_back(robot_pose.translation);
    if (t <= t_ref1 + 1e-12) {
      tracking_sq += (robot_pose.translation - ref_at(t).translation).squaredNorm();
      ++tracking_n;
    }
  }

  // --- metrics ---------------------------------------------------------------
  report.tracking_rmse = tracking_n > 0 ? std::sqrt(tracking_sq / static_cast<double>(tracking_n)) : 0.0;

  if (robot_effects.size() >= 3) {
    const LagEstimate lag = robot_exec_latency(reference, robot_effects,
                                               cfg.misalignment_max_lag, tick);
    report.temporal_misalignment = lag.lag;
  } else {
    report.temporal_misalignment = cfg.misalignment_max_lag;
  }

  // Release timing on command effects: when the robot setpoint first crosses
  // the release coordinate and the gripper setpoint first opens.
  std::vector<TimedSample<double>> robot_coord;
  robot_coord.reserve(robot_effects.size());
  for (const auto& s : robot_effects.samples) {
    robot_coord.push_back({s.t, dir.dot(s.pose.translation)});
  }
  report.robot_release_time = detail::first_upward_crossing(robot_coord, release_coord, t_end);
  report.gripper_release_time =
      detail::first_upward_crossing(gripper_effects, release_threshold, t_end);
  report.release_time_error = std::abs(report.gripper_release_time - report.robot_release_time);

  // Jerk of the achieved motion (third central difference).
  if (achieved_pos.size() >= 4) {
    double jerk_sum = 0.0;
    for (std::size_t k = 0; k + 3 < achieved_pos.size(); ++k) {
      const Eigen::Vector3d j3 = achieved_pos[k + 3] - 3.0 * achieved_pos[k + 2] +
                                 3.0 * achieved_pos[k + 1] - achieved_pos[k];
      jerk_sum += (j3 / (tick * tick * tick)).norm();
    }
    report.jerk_mean = jerk_sum / static_cast<double>(achieved_pos.size() - 3);
  }
  return report;
}

inline SimReport simulate(const TossProfile& toss, const SimConfig& cfg,
                          std::vector<Command>* dispatch_log = nullptr) {
  return simulate(toss.trajectory, toss.width, cfg, dispatch_log);
}

/** Run simulate for every config against the same reference. */
inline std::vector<SimReport> sweep(const PoseTrajectory& reference,
                                    const TimedStream<double>& width_profile,
                                    const std::vector<SimConfig>& configs) {
  std::vector<SimReport> reports;
  reports.reserve(configs.size());
  for (const SimConfig& cfg : configs) {
    reports.push_back(simulate(reference, width_profile, cfg));
  }
  return reports;
}

}  // namespace umi
