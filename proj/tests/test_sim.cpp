#include <catch2/catch.hpp>

#include <cmath>
#include <cstring>
#include <sstream>

#include "helpers.hpp"
#include "umi/dispatch_log.hpp"
#include "umi/sim.hpp"

using namespace umi;
using namespace umi::testing;

namespace {

LatencyProfile profile_ms(double cam, double proprio, double grip, double robot) {
  return {cam / 1000.0, proprio / 1000.0, grip / 1000.0, robot / 1000.0};
}

SimConfig matched_config() {
  SimConfig cfg;
  cfg.profile = profile_ms(130, 5, 40, 100);
  cfg.assumed_profile = cfg.profile;
  cfg.freq = 20.0;
  cfg.inference_delay = 0.010;
  cfg.tracker_tau = 0.015;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("toss_profile: peak speed, unique release, ballistic range") {
  TossParams p;
  const TossProfile toss = toss_profile(p);

  // Peak finite-difference speed matches the requested peak.
  double peak = 0.0;
  const auto& s = toss.trajectory.samples;
  for (std::size_t k = 1; k < s.size(); ++k) {
    peak = std::max(peak, (s[k].pose.translation - s[k - 1].pose.translation).norm() /
                              (s[k].t - s[k - 1].t));
  }
  CHECK(peak == Approx(p.peak_speed).epsilon(0.01));

  // Exactly one upward crossing of the release threshold.
  const double thr = 0.5 * (p.width_closed + p.width_open);
  std::size_t crossings = 0;
  for (std::size_t k = 1; k < toss.width.size(); ++k) {
    if (toss.width.samples[k - 1].value < thr && toss.width.samples[k].value >= thr) ++crossings;
  }
  CHECK(crossings == 1);
  CHECK(toss.release_time == Approx(p.hold + 0.5 * p.travel * M_PI / (2.0 * p.peak_speed)));

  // Ballistics oracle: horizontal release at height h lands after
  // sqrt(2h/g), range = vx * t.
  const double g = 9.80665;
  const double t_fall = std::sqrt(2.0 * p.height / g);
  const double expected = p.peak_speed * t_fall;
  CHECK(std::abs(projectile_range(toss.release_position, toss.release_velocity, 0.0, g) -
                 expected) < 1e-6);

  // Travel covered.
  CHECK(s.back().pose.translation.x() == Approx(p.travel).margin(1e-9));

  TossParams bad = p;
  bad.width_open = bad.width_closed;
  CHECK_THROWS_AS(toss_profile(bad), Error);
}

TEST_CASE("simulate: zero-latency degenerate case") {
  SimConfig cfg;
  cfg.freq = 20.0;
  cfg.inference_delay = 0.0;
  cfg.tracker_tau = 0.03;
  const TossProfile toss = toss_profile(TossParams{});
  const SimReport r = simulate(toss, cfg);
  CHECK(r.temporal_misalignment <= cfg.tick + 1e-12);
  CHECK(r.release_time_error <= cfg.tick + 1e-12);
  CHECK(r.tracking_rmse > 0.0);  // tracker lag remains
  CHECK(r.tracking_rmse < 0.08);
  CHECK(r.chunks_emitted > 0);
  CHECK(r.commands_sent > 0);
}

TEST_CASE("simulate: bit-identical reports for identical configs") {
  const TossProfile toss = toss_profile(TossParams{});
  const SimConfig cfg = matched_config();
  const SimReport a = simulate(toss, cfg);
  const SimReport b = simulate(toss, cfg);
  CHECK(std::memcmp(&a, &b, sizeof(SimReport)) == 0);
}

TEST_CASE("simulate: matched profile meets the latency-matching targets") {
  const TossProfile toss = toss_profile(TossParams{});
  const SimReport r = simulate(toss, matched_config());
  CHECK(r.temporal_misalignment <= 0.050);
  CHECK(r.release_time_error <= 0.050);
  CHECK(r.reinference_events == 0);
}

TEST_CASE("simulate: zero assumed latencies reproduce the out-of-sync behavior") {
  const TossProfile toss = toss_profile(TossParams{});
  SimConfig ablated = matched_config();
  ablated.assumed_profile = LatencyProfile{};

  const SimReport matched = simulate(toss, matched_config());
  const SimReport r = simulate(toss, ablated);
  // Roughly camera + robot execution latency.
  CHECK(r.temporal_misalignment >= 0.200);
  CHECK(r.temporal_misalignment <= 0.300);
  // Gripper and robot commands land 60 ms apart.
  CHECK(r.release_time_error >= 0.060 - 1e-9);
  CHECK(r.temporal_misalignment >= 3.0 * std::max(matched.temporal_misalignment, 1e-3));
}

TEST_CASE("simulate: misalignment non-decreasing in each true latency when assumed zero") {
  const TossProfile toss = toss_profile(TossParams{});
  SimConfig cfg = matched_config();
  cfg.assumed_profile = LatencyProfile{};
  cfg.misalignment_max_lag = 0.8;

  double prev = -1.0;
  for (double cam : {0.05, 0.10, 0.15}) {
    cfg.profile = profile_ms(cam * 1000, 5, 40, 100);
    const double m = simulate(toss, cfg).temporal_misalignment;
    CHECK(m >= prev - 1e-9);
    prev = m;
  }
  prev = -1.0;
  for (double robot : {0.0, 0.05, 0.10, 0.20}) {
    cfg.profile = profile_ms(130, 5, 40, robot * 1000);
    const double m = simulate(toss, cfg).temporal_misalignment;
    CHECK(m >= prev - 1e-9);
    prev = m;
  }
  // Proprio and gripper latency do not shift the EE command timeline.
  cfg.profile = profile_ms(130, 5, 40, 100);
  const double base = simulate(toss, cfg).temporal_misalignment;
  cfg.profile = profile_ms(130, 50, 40, 100);
  CHECK(simulate(toss, cfg).temporal_misalignment >= base - 1e-9);
}

TEST_CASE("simulate: compensation efficacy over random profiles") {
  // Profiles must leave at least one executable step per chunk: when camera
  // latency + inference + execution exceed the chunk span (Ta-1)/freq, every
  // chunk is outdated on arrival and the run degenerates to re-inference.
  // At 10 Hz the envelope is 500 ms, which accommodates components up to
  // 300 ms provided the pair fits.
  const TossProfile toss = toss_profile(TossParams{});
  auto& gen = rng(801);
  std::uniform_real_distribution<double> cam(0.0, 0.3);
  for (int trial = 0; trial < 5; ++trial) {
    SimConfig cfg = matched_config();
    cfg.freq = 10.0;
    cfg.misalignment_max_lag = 0.8;
    const double l_camera = cam(gen);
    const double budget = (static_cast<double>(cfg.action_horizon - 1) / cfg.freq) - l_camera -
                          cfg.inference_delay - 0.05;
    std::uniform_real_distribution<double> exec(0.0, std::min(0.3, std::max(0.0, budget)));
    cfg.profile = LatencyProfile{l_camera, 0.1 * l_camera, exec(gen), exec(gen)};
    cfg.assumed_profile = cfg.profile;
    const SimReport matched = simulate(toss, cfg);
    CHECK(matched.commands_sent > 0);
    CHECK(matched.temporal_misalignment <= 1.0 / cfg.freq + cfg.tracker_tau + 1e-9);

    SimConfig zero = cfg;
    zero.assumed_profile = LatencyProfile{};
    const SimReport ablated = simulate(toss, zero);
    const double total = cfg.profile.l_camera + cfg.profile.l_robot_exec;
    if (total > 2.0 / cfg.freq) {
      CHECK(matched.temporal_misalignment < ablated.temporal_misalignment);
    }
  }
}

TEST_CASE("simulate: error paths") {
  const TossProfile toss = toss_profile(TossParams{});

  SimConfig bad_tau = matched_config();
  bad_tau.tracker_tau = 0.0;
  try {
    simulate(toss, bad_tau);
    FAIL("expected unstable_tracker");
  } catch (const Error& e) {
    CHECK(e.code() == "unstable_tracker");
  }

  TossParams tiny;
  tiny.hold = 0.2;
  tiny.peak_speed = 3.0;  // ramp ~0.42 s, total ~0.8 s << 3 s
  try {
    simulate(toss_profile(tiny), matched_config());
    FAIL("expected reference_too_short");
  } catch (const Error& e) {
    CHECK(e.code() == "reference_too_short");
  }

  // Flat width profile: no release event.
  TossProfile flat = toss;
  for (auto& s : flat.width.samples) s.value = 0.03;
  CHECK_THROWS_AS(simulate(flat, matched_config()), Error);
}

TEST_CASE("simulate: dispatch log round trip, send times monotone per actuator") {
  const TossProfile toss = toss_profile(TossParams{});
  std::vector<Command> log;
  simulate(toss, matched_config(), &log);
  REQUIRE(!log.empty());

  double last_robot = -1e300, last_grip = -1e300;
  for (const Command& c : log) {
    if (c.actuator == Actuator::Robot) {
      CHECK(c.t_send > last_robot);
      last_robot = c.t_send;
    } else {
      CHECK(c.t_send > last_grip);
      last_grip = c.t_send;
    }
    CHECK(c.t_target >= c.t_send);
  }

  std::stringstream buf;
  write_dispatch_log(buf, log);
  const std::vector<Command> back = read_dispatch_log(buf);
  REQUIRE(back.size() == log.size());
  for (std::size_t k = 0; k < log.size(); ++k) {
    CHECK(back[k].t_send == log[k].t_send);
    CHECK(back[k].t_target == log[k].t_target);
    CHECK(back[k].actuator == log[k].actuator);
    if (log[k].actuator == Actuator::Robot) {
      CHECK(back[k].pose.translation == log[k].pose.translation);
    } else {
      CHECK(back[k].width == log[k].width);
    }
  }
}

TEST_CASE("sweep: one row per config, ratio between matched and ablated") {
  const TossProfile toss = toss_profile(TossParams{});
  SimConfig ablated = matched_config();
  ablated.assumed_profile = LatencyProfile{};

  const auto reports = sweep(toss.trajectory, toss.width, {matched_config(), ablated});
  REQUIRE(reports.size() == 2);
  CHECK(reports[1].temporal_misalignment >=
        3.0 * std::max(reports[0].temporal_misalignment, 1e-3));

  CHECK(sweep(toss.trajectory, toss.width, {}).empty());
}
