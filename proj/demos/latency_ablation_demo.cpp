// Runs the tossing reference through the closed loop twice: once with the
// scheduler knowing the true latencies, once believing they are zero.

#include <cstdio>

#include "umi/sim.hpp"

int main() {
  const umi::TossProfile toss = umi::toss_profile(umi::TossParams{});

  umi::SimConfig matched;
  matched.profile = umi::LatencyProfile{0.130, 0.005, 0.040, 0.100};
  matched.assumed_profile = matched.profile;
  matched.freq = 20.0;
  matched.inference_delay = 0.010;
  matched.tracker_tau = 0.015;

  umi::SimConfig ablated = matched;
  ablated.assumed_profile = umi::LatencyProfile{};  // latency matching off

  const umi::SimReport a = umi::simulate(toss, matched);
  const umi::SimReport b = umi::simulate(toss, ablated);

  std::printf("%-28s %12s %12s\n", "", "matched", "assumed-zero");
  std::printf("%-28s %9.1f ms %9.1f ms\n", "temporal misalignment",
              1e3 * a.temporal_misalignment, 1e3 * b.temporal_misalignment);
  std::printf("%-28s %9.1f ms %9.1f ms\n", "release time error",
              1e3 * a.release_time_error, 1e3 * b.release_time_error);
  std::printf("%-28s %9.1f mm %9.1f mm\n", "tracking rmse", 1e3 * a.tracking_rmse,
              1e3 * b.tracking_rmse);
  std::printf("%-28s %12zu %12zu\n", "commands sent", a.commands_sent, b.commands_sent);
  return 0;
}
