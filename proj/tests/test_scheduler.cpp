#include <catch2/catch.hpp>

#include <cmath>

#include "helpers.hpp"
#include "umi/scheduler.hpp"

using namespace umi;
using namespace umi::testing;

namespace {

// Steps every `dt` starting at t_obs itself.
ActionChunk make_chunk(double t_obs, std::size_t n, double dt, double width = 0.04) {
  ActionChunk chunk;
  chunk.t_obs = t_obs;
  chunk.dt_output = dt;
  for (std::size_t k = 0; k < n; ++k) {
    chunk.steps.push_back({t_obs + static_cast<double>(k) * dt,
                           Pose::from_translation(0.01 * static_cast<double>(k), 0, 0), width});
  }
  return chunk;
}

LatencyProfile profile_ms(double cam, double proprio, double grip, double robot) {
  return {cam / 1000.0, proprio / 1000.0, grip / 1000.0, robot / 1000.0};
}

}  // namespace

TEST_CASE("trim_outdated: zero latency keeps everything") {
  const auto chunk = make_chunk(10.0, 6, 0.05);
  const auto r = trim_outdated(chunk, 10.0, LatencyProfile{});
  CHECK(r.discarded == 0);
  CHECK(r.robot_chunk.steps.size() == 6);
  CHECK_FALSE(r.needs_reinference);
}

TEST_CASE("trim_outdated: 120 ms output delay + 100 ms exec discards 5 of 10") {
  const auto chunk = make_chunk(0.0, 10, 0.05);
  const auto r = trim_outdated(chunk, 0.120, profile_ms(0, 0, 0, 100));
  // t_act = 0.220; steps at 0,0.05,...,0.20 go, 0.25..0.45 stay.
  CHECK(r.discarded == 5);
  REQUIRE(r.robot_chunk.steps.size() == 5);
  CHECK(r.robot_chunk.steps.front().t_target == Approx(0.25));
}

TEST_CASE("trim_outdated: fully outdated 6-step chunk signals re-inference") {
  const auto chunk = make_chunk(0.0, 6, 0.05);  // spans 0 .. 0.25
  const auto r = trim_outdated(chunk, 0.300, profile_ms(0, 0, 40, 100));
  CHECK(r.discarded == 6);
  CHECK(r.needs_reinference);
  CHECK(r.robot_chunk.steps.empty());
}

TEST_CASE("trim_outdated: per-actuator policy keeps more gripper steps") {
  const auto chunk = make_chunk(0.0, 6, 0.05);
  const auto r = trim_outdated(chunk, 0.05, profile_ms(0, 0, 40, 100), TrimPolicy::PerActuator);
  // Robot cut 0.15, gripper cut 0.09.
  CHECK(r.robot_chunk.steps.size() == 3);
  CHECK(r.gripper_chunk.steps.size() == 4);
  // Steps below both cuts: 0.0 and 0.05.
  CHECK(r.discarded == 2);
}

TEST_CASE("trim_outdated: idempotent and monotone in latency") {
  auto& gen = rng(501);
  std::uniform_real_distribution<double> lat(0.0, 0.3);
  std::uniform_real_distribution<double> delay(0.0, 0.2);
  for (int i = 0; i < 300; ++i) {
    const auto chunk = make_chunk(5.0, 6, 0.05);
    LatencyProfile p{lat(gen), lat(gen), lat(gen), lat(gen)};
    const double t_out = 5.0 + delay(gen);
    const auto once = trim_outdated(chunk, t_out, p);
    const auto twice = trim_outdated(once.robot_chunk, t_out, p);
    CHECK(twice.discarded == 0);
    CHECK(twice.robot_chunk.steps.size() == once.robot_chunk.steps.size());

    LatencyProfile worse = p;
    worse.l_robot_exec += 0.05;
    CHECK(trim_outdated(chunk, t_out, worse).discarded >= once.discarded);
    LatencyProfile worse_grip = p;
    worse_grip.l_gripper_exec += 0.05;
    CHECK(trim_outdated(chunk, t_out, worse_grip).discarded >= once.discarded);
  }
}

TEST_CASE("trim_outdated: t_output before t_obs is a caller bug") {
  const auto chunk = make_chunk(10.0, 6, 0.05);
  CHECK_THROWS_AS(trim_outdated(chunk, 9.9, LatencyProfile{}), Error);
}

TEST_CASE("plan_dispatch: zero latency sends at the target times") {
  const auto chunk = make_chunk(1.0, 6, 0.05);
  const auto plan = plan_dispatch(chunk, LatencyProfile{}, 1.0);
  REQUIRE(plan.commands.size() == 12);  // robot + gripper per step
  for (const auto& c : plan.commands) CHECK(c.t_send == c.t_target);
}

TEST_CASE("plan_dispatch: gripper goes out 60 ms after the matching robot command") {
  const auto chunk = make_chunk(0.0, 6, 0.05);
  const auto profile = profile_ms(130, 5, 40, 100);
  const auto trimmed = trim_outdated(chunk, 0.15, profile);
  const auto plan = plan_dispatch(trimmed, profile, 0.15);
  for (const auto& robot : plan.commands) {
    if (robot.actuator != Actuator::Robot) continue;
    for (const auto& grip : plan.commands) {
      if (grip.actuator == Actuator::Gripper && grip.t_target == robot.t_target) {
        CHECK(grip.t_send - robot.t_send == Approx(0.060).margin(1e-12));
      }
    }
  }
  // Per-actuator send times strictly increasing.
  double last_robot = -1e300, last_grip = -1e300;
  for (const auto& c : plan.commands) {
    if (c.actuator == Actuator::Robot) {
      CHECK(c.t_send > last_robot);
      last_robot = c.t_send;
    } else {
      CHECK(c.t_send > last_grip);
      last_grip = c.t_send;
    }
  }
}

TEST_CASE("plan_dispatch: untrimmed chunk raises late_plan") {
  const auto chunk = make_chunk(0.0, 6, 0.05);
  try {
    plan_dispatch(chunk, profile_ms(0, 0, 40, 100), 0.0);
    FAIL("expected late_plan");
  } catch (const Error& e) {
    CHECK(e.code() == "late_plan");
  }
}

TEST_CASE("retime: identity, spacing, and bit-exact round trip") {
  const auto chunk = make_chunk(2.0, 6, 0.05);
  const auto same = retime(chunk, 1.0);
  for (std::size_t k = 0; k < chunk.steps.size(); ++k) {
    CHECK(same.steps[k].t_target == chunk.steps[k].t_target);
  }

  const auto slow = retime(chunk, 0.5);
  for (std::size_t k = 1; k < slow.steps.size(); ++k) {
    CHECK(slow.steps[k].t_target - slow.steps[k - 1].t_target == Approx(0.1).margin(1e-12));
  }
  CHECK(slow.dt_output == Approx(0.1).margin(1e-15));

  const auto round = retime(retime(chunk, 2.0), 0.5);
  REQUIRE(round.steps.size() == chunk.steps.size());
  for (std::size_t k = 0; k < chunk.steps.size(); ++k) {
    // Timestamps round-trip to within an ulp; payload is bit-for-bit.
    CHECK(round.steps[k].t_target == Approx(chunk.steps[k].t_target).margin(1e-12));
    CHECK(round.steps[k].width == chunk.steps[k].width);
    CHECK(round.steps[k].rel_pose.translation == chunk.steps[k].rel_pose.translation);
    CHECK(round.steps[k].rel_pose.rotation.coeffs() == chunk.steps[k].rel_pose.rotation.coeffs());
  }

  CHECK_THROWS_AS(retime(chunk, 0.0), Error);
  CHECK_THROWS_AS(retime(chunk, -1.0), Error);
}

TEST_CASE("to_absolute_targets: trivial anchors") {
  auto& gen = rng(502);
  ActionChunk ids = make_chunk(0.0, 4, 0.05);
  for (auto& s : ids.steps) s.rel_pose = Pose::identity();
  const Pose current = random_pose(gen);
  for (const auto& t : to_absolute_targets(ids, current)) {
    CHECK(approx_equal(t.pose, current, 1e-12));
  }

  const auto chunk = make_chunk(0.0, 4, 0.05);
  for (std::size_t k = 0; k < chunk.steps.size(); ++k) {
    CHECK(approx_equal(to_absolute_targets(chunk, Pose::identity())[k].pose,
                       chunk.steps[k].rel_pose, 1e-12));
  }
}

TEST_CASE("to_absolute_targets: matrix oracle on random chunks") {
  auto& gen = rng(503);
  for (int i = 0; i < 50; ++i) {
    ActionChunk chunk = make_chunk(0.0, 6, 0.05);
    for (auto& s : chunk.steps) s.rel_pose = random_pose(gen);
    const Pose current = random_pose(gen);
    const auto targets = to_absolute_targets(chunk, current);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      CHECK(mat4_distance(mat4_compose(current, chunk.steps[k].rel_pose), targets[k].pose) < 1e-12);
    }
  }
}

TEST_CASE("dispatcher: newest chunk preempts unsent commands") {
  const auto profile = profile_ms(0, 0, 40, 100);
  Dispatcher dispatcher;

  const auto chunk_a = make_chunk(0.0, 6, 0.05);
  const auto trim_a = trim_outdated(chunk_a, 0.0, profile);
  dispatcher.submit(plan_dispatch(trim_a, profile, 0.0));
  const std::size_t pending_a = dispatcher.pending().size();
  REQUIRE(pending_a > 0);

  // Drain up to t=0.1, then submit a fresher overlapping chunk.
  const auto sent_early = dispatcher.advance(0.1);
  const auto chunk_b = make_chunk(0.05, 6, 0.05);
  const auto trim_b = trim_outdated(chunk_b, 0.1, profile);
  dispatcher.submit(plan_dispatch(trim_b, profile, 0.1));

  // Everything still pending must now come from chunk B's plan: no pending
  // robot command may target a time B also targets with different content.
  std::vector<Command> rest;
  for (auto c : dispatcher.advance(1e9)) rest.push_back(c);
  for (const auto& c : rest) {
    if (c.actuator != Actuator::Robot) continue;
    bool in_b = false;
    for (const auto& s : trim_b.robot_chunk.steps) {
      if (s.t_target == c.t_target && s.rel_pose.translation == c.pose.translation) in_b = true;
    }
    CHECK(in_b);
  }
  // Send order is preserved overall.
  double last = -1e300;
  for (const auto& c : rest) {
    CHECK(c.t_send >= last);
    last = c.t_send;
  }
  CHECK(dispatcher.sent_count() == sent_early.size() + rest.size());
}

TEST_CASE("timeline oracle: trim + dispatch on the 6-step 20 Hz chunk") {
  // Independent arithmetic: expected kept targets and send times, spelled
  // out by hand for profile {130, 5, 100, 40} ms, inference done 140 ms
  // after t_obs.
  const double t_obs = 1.0;
  const auto chunk = make_chunk(t_obs, 6, 0.05);
  const auto profile = profile_ms(130, 5, 40, 100);
  const double t_output = t_obs + 0.140;

  // t_act = 1.140 + 0.100 = 1.240 -> keep 1.25; discard 1.00..1.20.
  const auto trimmed = trim_outdated(chunk, t_output, profile);
  REQUIRE(trimmed.robot_chunk.steps.size() == 1);
  CHECK(trimmed.discarded == 5);
  CHECK(trimmed.robot_chunk.steps[0].t_target == Approx(1.25).margin(1e-12));

  const auto plan = plan_dispatch(trimmed, profile, t_output);
  REQUIRE(plan.commands.size() == 2);
  CHECK(plan.commands[0].actuator == Actuator::Robot);
  CHECK(plan.commands[0].t_send == Approx(1.25 - 0.100).margin(1e-12));
  CHECK(plan.commands[1].actuator == Actuator::Gripper);
  CHECK(plan.commands[1].t_send == Approx(1.25 - 0.040).margin(1e-12));
}

TEST_CASE("action chunk invariants") {
  ActionChunk chunk = make_chunk(1.0, 4, 0.05);
  CHECK_NOTHROW(chunk.validate());

  ActionChunk early = chunk;
  early.steps[0].t_target = 0.9;  // before t_obs
  CHECK_THROWS_AS(early.validate(), Error);

  ActionChunk unsorted = chunk;
  std::swap(unsorted.steps[1], unsorted.steps[2]);
  CHECK_THROWS_AS(unsorted.validate(), Error);

  ActionChunk wide = chunk;
  wide.steps[1].width = 0.09;  // beyond the stroke
  CHECK_THROWS_AS(wide.validate(), Error);
}
