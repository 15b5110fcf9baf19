#include <catch2/catch.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "scene_gen.hpp"
#include "umi/jsonl.hpp"
#include "umi/latency.hpp"

using namespace umi;
using namespace umi::testing;

#ifndef UMI_CLI_PATH
#error "UMI_CLI_PATH must point at the umi binary"
#endif

namespace {

int run_cli(const std::string& args, const std::string& out_file = "/dev/null") {
  const std::string cmd = std::string(UMI_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json read_json_file(const fs::path& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  json j;
  f >> j;
  return j;
}

}  // namespace

TEST_CASE("cli: eval-traj of a trajectory against itself reports zero ATE") {
  TempDir tmp("cli_eval");
  const PoseTrajectory traj = demo_trajectory("map:x", 0.0, 3.0, 0.1);
  const std::string file = (tmp.path / "traj.jsonl").string();
  write_trajectory_file(file, traj, "est");

  const std::string report_path = (tmp.path / "report.json").string();
  const int rc = run_cli("eval-traj --est " + file + " --gt " + file + " --out " + report_path);
  CHECK(rc == 0);
  const json report = read_json_file(report_path);
  CHECK(report["ate"]["pos_mean"].get<double>() < 1e-12);
  CHECK(report["ate"]["rot_mean_deg"].get<double>() < 1e-6);
  CHECK(report["alignment"]["residual_rmse"].get<double>() < 1e-12);
}

TEST_CASE("cli: missing required flag is a usage error") {
  CHECK(run_cli("eval-traj") == 2);
  CHECK(run_cli("definitely-not-a-subcommand") == 2);
}

TEST_CASE("cli: domain errors produce structured JSON on stderr and exit 1") {
  TempDir tmp("cli_err");
  const std::string err_file = (tmp.path / "err.txt").string();
  const int rc = run_cli("eval-traj --est /nonexistent.jsonl --gt /nonexistent.jsonl", err_file);
  CHECK(rc == 1);
  std::ifstream f(err_file);
  json err;
  f >> err;
  CHECK(err["error"]["code"] == "io");
}

TEST_CASE("cli: calibrate-latency recovers an injected lag from files") {
  TempDir tmp("cli_cal");
  ProbeParams p;
  p.freq_start_hz = 0.5;
  p.freq_end_hz = 3.0;
  p.duration_s = 8.0;
  p.sample_rate_hz = 100.0;
  p.amplitude = 0.03;
  p.offset = 0.04;
  const ProbeSignal probe = generate_probe(ProbeKind::Chirp, p);

  TimedStream<double> measured;
  measured.stream_id = "measured";
  for (const auto& s : probe.stream.samples) measured.samples.push_back({s.t + 0.180, s.value});

  const std::string cmd_file = (tmp.path / "cmd.jsonl").string();
  const std::string meas_file = (tmp.path / "meas.jsonl").string();
  {
    auto f = open_output(cmd_file);
    json extras;
    extras["waveform"] = "chirp";
    extras["freq_start_hz"] = p.freq_start_hz;
    extras["freq_end_hz"] = p.freq_end_hz;
    extras["amplitude"] = p.amplitude;
    write_width_stream(f, probe.stream, extras);
  }
  {
    auto f = open_output(meas_file);
    write_width_stream(f, measured);
  }

  const std::string report_path = (tmp.path / "lag.json").string();
  const int rc = run_cli("calibrate-latency --commanded " + cmd_file + " --measured " + meas_file +
                         " --max-lag 0.5 --resolution 0.001 --out " + report_path);
  CHECK(rc == 0);
  const json report = read_json_file(report_path);
  CHECK(std::abs(report["l_e2e"].get<double>() - 0.180) < 0.005);
  CHECK(report["score"].get<double>() > 0.99);
  CHECK(report["probe"] == "chirp");
}

TEST_CASE("cli: ingest, filter, export pipeline on a synthetic scene") {
  TempDir tmp("cli_pipe");
  TempDir out("cli_pipe_out");
  SceneGenOptions opt;
  opt.scene_id = "cliscene";
  opt.n_demo_pairs = 3;
  opt.n_reach_violations = 1;
  generate_scene(tmp.str(), opt);

  CHECK(run_cli("ingest " + tmp.str()) == 0);
  json episodes = read_json_file(tmp.path / "episodes.json");
  REQUIRE(episodes["episodes"].size() == 3);
  CHECK(episodes["episodes"][0]["verdict"] == "pending");

  // Kinematic model file matching the generator's feasible envelope.
  const std::string model_path = (tmp.path / "model.json").string();
  {
    std::ofstream f(model_path);
    f << R"({"base_pose": [0,0,0,1,0,0,0], "reach_min": 0.15, "reach_max": 0.9,
             "z_min": 0.0, "z_max": 1.0, "v_max": 1.0, "a_max": 15.0})";
  }
  CHECK(run_cli("filter --model " + model_path + " " + tmp.str()) == 0);
  episodes = read_json_file(tmp.path / "episodes.json");
  std::size_t rejected_reach = 0, accepted = 0;
  for (const auto& ep : episodes["episodes"]) {
    if (ep["verdict"] == "accepted") ++accepted;
    if (ep["verdict"] == "rejected" &&
        ep["reason"].get<std::string>().rfind("reach", 0) == 0) {
      ++rejected_reach;
    }
  }
  CHECK(accepted == 2);
  CHECK(rejected_reach == 1);

  const std::string export_config = (tmp.path / "export.json").string();
  {
    std::ofstream f(export_config);
    f << R"({"freq": 10.0, "obs_horizon": 2, "action_horizon": 6, "repr": "relative_trajectory"})";
  }
  CHECK(run_cli("export --config " + export_config + " --out " + out.str() + " " + tmp.str()) == 0);
  const json manifest = read_json_file(out.path / "manifest.json");
  CHECK(manifest["counts"]["episodes_accepted"] == 2);
  CHECK(manifest["counts"]["episodes_skipped"] == 1);
  CHECK(manifest["counts"]["samples"].get<std::size_t>() > 0);
}

TEST_CASE("cli: simulate and sweep from config files") {
  TempDir tmp("cli_sim");
  const std::string config_path = (tmp.path / "sim.json").string();
  {
    std::ofstream f(config_path);
    f << R"({"profile": {"l_camera": 0.13, "l_proprio": 0.005, "l_gripper_exec": 0.04,
               "l_robot_exec": 0.1},
             "assumed_profile": {"l_camera": 0.13, "l_proprio": 0.005, "l_gripper_exec": 0.04,
               "l_robot_exec": 0.1},
             "freq": 20.0, "inference_delay": 0.01, "tracker_tau": 0.015, "seed": 3})";
  }
  const std::string report_path = (tmp.path / "report.json").string();
  CHECK(run_cli("simulate --config " + config_path + " --out " + report_path) == 0);
  const json report = read_json_file(report_path);
  CHECK(report["report"]["temporal_misalignment"].get<double>() <= 0.05);
  CHECK(report["report"]["seed"] == 3);

  const std::string sweep_path = (tmp.path / "sweep.json").string();
  {
    std::ofstream f(sweep_path);
    f << R"({"configs": [
         {"name": "matched",
          "profile": {"l_camera": 0.13, "l_proprio": 0.005, "l_gripper_exec": 0.04, "l_robot_exec": 0.1},
          "assumed_profile": {"l_camera": 0.13, "l_proprio": 0.005, "l_gripper_exec": 0.04, "l_robot_exec": 0.1},
          "freq": 20.0, "inference_delay": 0.01, "tracker_tau": 0.015},
         {"name": "ablated",
          "profile": {"l_camera": 0.13, "l_proprio": 0.005, "l_gripper_exec": 0.04, "l_robot_exec": 0.1},
          "freq": 20.0, "inference_delay": 0.01, "tracker_tau": 0.015}
       ]})";
  }
  const std::string csv_path = (tmp.path / "table.csv").string();
  CHECK(run_cli("sweep --configs " + sweep_path + " --out " + csv_path) == 0);
  std::ifstream csv(csv_path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);  // header + 2 rows
  CHECK(lines[1].rfind("matched,", 0) == 0);
  CHECK(lines[2].rfind("ablated,", 0) == 0);
}

TEST_CASE("cli: eval-traj with a bimanual pair reports inter-gripper RPE") {
  TempDir tmp("cli_pair");
  PoseTrajectory left = demo_trajectory("map:x", 0.0, 3.0, 0.1);
  PoseTrajectory right = demo_trajectory("map:x", 0.0, 3.0, 0.9);
  for (auto& s : right.samples) s.pose.translation += Eigen::Vector3d(0.4, 0, 0);
  const std::string lf = (tmp.path / "left.jsonl").string();
  const std::string rf = (tmp.path / "right.jsonl").string();
  write_trajectory_file(lf, left, "left");
  write_trajectory_file(rf, right, "right");

  const std::string report_path = (tmp.path / "report.json").string();
  const int rc = run_cli("eval-traj --est " + lf + " --gt " + lf + " --pair " + rf + " " + rf +
                         " --out " + report_path);
  CHECK(rc == 0);
  const json report = read_json_file(report_path);
  CHECK(report["inter_gripper_rpe"]["pos_mean"].get<double>() < 1e-9);
  CHECK(report["inter_gripper_rpe"]["count"].get<std::size_t>() == left.size());
  CHECK(report.contains("ate_second"));
}
