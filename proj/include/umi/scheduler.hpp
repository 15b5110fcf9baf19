#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <string>
#include <vector>

#include "umi/error.hpp"
#include "umi/latency.hpp"
#include "umi/se3.hpp"

namespace umi {

// Full finger travel of the gripper, meters.
inline constexpr double kGripperStroke = 0.08;

struct ActionStep {
  double t_target = 0.0;  // seconds, absolute
  Pose rel_pose;          // relative to the pose at t_obs
  double width = 0.0;     // meters
};

/** A policy output: time-targeted relative poses + widths.
 *
 * Steps start at the observation anchor (first t_target == t_obs) and are
 * spaced dt_output apart in the demonstration timeline.
 */
struct ActionChunk {
  double t_obs = 0.0;
  std::vector<ActionStep> steps;
  double dt_output = 0.0;

  void validate() const {
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (steps[i].t_target < t_obs) {
        raise("bad_argument", "action chunk: t_target before t_obs");
      }
      if (i > 0 && !(steps[i].t_target > steps[i - 1].t_target)) {
        raise("bad_argument", "action chunk: t_target must be strictly increasing");
      }
      if (steps[i].width < 0.0 || steps[i].width > kGripperStroke) {
        raise("bad_argument", "action chunk: width outside the gripper stroke");
      }
    }
  }
};

enum class TrimPolicy {
  SharedCut,    // one cut at max(robot, gripper) execution latency
  PerActuator,  // separate cut per actuator
};

struct TrimResult {
  ActionChunk robot_chunk;
  ActionChunk gripper_chunk;       // identical to robot_chunk under SharedCut
  std::size_t discarded = 0;       // steps no actuator will execute
  bool needs_reinference = false;  // every step was outdated

  const ActionChunk& chunk() const { return robot_chunk; }
};

/** Drop steps that can no longer be executed on time.
 *
 * A step survives when t_target >= t_act with t_act = t_output plus the
 * execution latency (the max over both actuators under SharedCut). When
 * everything is outdated the caller must re-run inference; that is signaled,
 * not thrown, because it is the expected behavior on slow hardware.
 */
inline TrimResult trim_outdated(const ActionChunk& chunk, double t_output,
                                const LatencyProfile& profile,
                                TrimPolicy policy = TrimPolicy::SharedCut) {
  chunk.validate();
  profile.validate();
  if (t_output < chunk.t_obs) {
    raise("bad_argument", "trim_outdated: t_output before the chunk's t_obs");
  }
  const double robot_cut = t_output + (policy == TrimPolicy::SharedCut ? profile.max_exec()
                                                                       : profile.l_robot_exec);
  const double gripper_cut = t_output + (policy == TrimPolicy::SharedCut ? profile.max_exec()
                                                                         : profile.l_gripper_exec);
  TrimResult out;
  out.robot_chunk.t_obs = chunk.t_obs;
  out.robot_chunk.dt_output = chunk.dt_output;
  out.gripper_chunk.t_obs = chunk.t_obs;
  out.gripper_chunk.dt_output = chunk.dt_output;
  for (const ActionStep& step : chunk.steps) {
    const bool robot_ok = step.t_target >= robot_cut;
    const bool gripper_ok = step.t_target >= gripper_cut;
    if (robot_ok) out.robot_chunk.steps.push_back(step);
    if (gripper_ok) out.gripper_chunk.steps.push_back(step);
    if (!robot_ok && !gripper_ok) ++out.discarded;
  }
  out.needs_reinference = out.robot_chunk.steps.empty() && out.gripper_chunk.steps.empty();
  return out;
}

enum class Actuator { Robot, Gripper };

inline const char* to_string(Actuator a) {
  return a == Actuator::Robot ? "robot" : "gripper";
}

struct Command {
  double t_send = 0.0;
  double t_target = 0.0;
  Actuator actuator = Actuator::Robot;
  Pose pose;           // robot commands
  double width = 0.0;  // gripper commands
};

/** Send schedule: every command goes out execution-latency ahead of its
 * target time. Ordered by t_send; per-actuator send times are strictly
 * increasing. */
struct DispatchPlan {
  std::vector<Command> commands;
};

namespace detail {

inline void sort_plan(DispatchPlan& plan) {
  std::stable_sort(plan.commands.begin(), plan.commands.end(),
                   [](const Command& a, const Command& b) {
                     if (a.t_send != b.t_send) return a.t_send < b.t_send;
                     return static_cast<int>(a.actuator) < static_cast<int>(b.actuator);
                   });
}

}  // namespace detail

/** Schedule a trimmed chunk ahead of time, per actuator.
 *
 * Robot commands go out at t_target - l_robot_exec, gripper commands at
 * t_target - l_gripper_exec. Any send time before `now` means the chunk was
 * not trimmed against this profile; that raises late_plan with the offending
 * steps listed.
 */
inline DispatchPlan plan_dispatch(const ActionChunk& robot_chunk, const ActionChunk& gripper_chunk,
                                  const LatencyProfile& profile, double now) {
  profile.validate();
  DispatchPlan plan;
  std::string late;
  for (const ActionStep& step : robot_chunk.steps) {
    const double t_send = step.t_target - profile.l_robot_exec;
    if (t_send < now) late += " robot@" + std::to_string(step.t_target);
    plan.commands.push_back({t_send, step.t_target, Actuator::Robot, step.rel_pose, 0.0});
  }
  for (const ActionStep& step : gripper_chunk.steps) {
    const double t_send = step.t_target - profile.l_gripper_exec;
    if (t_send < now) late += " gripper@" + std::to_string(step.t_target);
    plan.commands.push_back({t_send, step.t_target, Actuator::Gripper, Pose(), step.width});
  }
  if (!late.empty()) {
    raise("late_plan", "plan_dispatch: send times already in the past for steps:" + late);
  }
  detail::sort_plan(plan);
  return plan;
}

inline DispatchPlan plan_dispatch(const ActionChunk& chunk, const LatencyProfile& profile,
                                  double now) {
  return plan_dispatch(chunk, chunk, profile, now);
}

inline DispatchPlan plan_dispatch(const TrimResult& trimmed, const LatencyProfile& profile,
                                  double now) {
  return plan_dispatch(trimmed.robot_chunk, trimmed.gripper_chunk, profile, now);
}

/** Rescale execution speed around the anchor: speed_factor 0.5 doubles the
 * inter-step spacing. Poses and widths are copied untouched. */
inline ActionChunk retime(const ActionChunk& chunk, double speed_factor) {
  if (!(speed_factor > 0.0)) raise("bad_argument", "retime: speed factor must be positive");
  ActionChunk out = chunk;
  for (ActionStep& step : out.steps) {
    step.t_target = chunk.t_obs + (step.t_target - chunk.t_obs) / speed_factor;
  }
  out.dt_output = chunk.dt_output / speed_factor;
  return out;
}

struct AbsoluteTarget {
  double t_target = 0.0;
  Pose pose;
  double width = 0.0;
};

// The controller consumes absolute setpoints: left-compose the pose the
// chunk was anchored at.
inline std::vector<AbsoluteTarget> to_absolute_targets(const ActionChunk& chunk,
                                                       const Pose& current_pose) {
  std::vector<AbsoluteTarget> out;
  out.reserve(chunk.steps.size());
  for (const ActionStep& step : chunk.steps) {
    out.push_back({step.t_target, compose(current_pose, step.rel_pose), step.width});
  }
  return out;
}

/** Single-writer command timeline with receding-horizon preemption.
 *
 * One scheduling authority submits plans and drains due commands; readers
 * may inspect the pending queue. A newly submitted plan preempts pending
 * commands of the same actuator at or after its own first send time --
 * fresher observations win.
 */
class Dispatcher {
 public:
  void submit(const DispatchPlan& plan) {
    for (Actuator actuator : {Actuator::Robot, Actuator::Gripper}) {
      double first = 1e300;
      bool any = false;
      for (const Command& c : plan.commands) {
        if (c.actuator == actuator) {
          first = std::min(first, c.t_send);
          any = true;
        }
      }
      if (!any) continue;
      pending_.erase(std::remove_if(pending_.begin(), pending_.end(),
                                    [&](const Command& c) {
                                      return c.actuator == actuator && c.t_send >= first;
                                    }),
                     pending_.end());
    }
    pending_.insert(pending_.end(), plan.commands.begin(), plan.commands.end());
    std::stable_sort(pending_.begin(), pending_.end(), [](const Command& a, const Command& b) {
      if (a.t_send != b.t_send) return a.t_send < b.t_send;
      return static_cast<int>(a.actuator) < static_cast<int>(b.actuator);
    });
  }

  // Pop and return every command due at or before `now`, in send order.
  std::vector<Command> advance(double now) {
    std::vector<Command> due;
    while (!pending_.empty() && pending_.front().t_send <= now) {
      due.push_back(pending_.front());
      pending_.pop_front();
      ++sent_;
    }
    return due;
  }

  const std::deque<Command>& pending() const { return pending_; }
  std::size_t sent_count() const { return sent_; }

 private:
  std::deque<Command> pending_;
  std::size_t sent_ = 0;
};

}  // namespace umi
