#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "umi/dataset.hpp"
#include "umi/dispatch_log.hpp"
#include "umi/error.hpp"
#include "umi/jsonl.hpp"
#include "umi/latency.hpp"
#include "umi/sim.hpp"
#include "umi/traj_eval.hpp"
#include "umi/version.hpp"

namespace {

using umi::json;
using umi::ordered_json;

std::string now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&t));
  return buf;
}

ordered_json meta_block() {
  return {{"tool", "umi"}, {"version", umi::kVersion}, {"created", now_iso8601()}};
}

// Reports go to --out when given, otherwise to stdout; the human summary is
// printed only when it does not collide with the machine output.
void emit_report(const ordered_json& report, const std::string& out_path,
                 const std::string& summary) {
  if (!out_path.empty()) {
    auto f = umi::open_output(out_path);
    f << report.dump(2) << "\n";
    std::cout << summary;
  } else {
    std::cout << report.dump(2) << "\n";
    std::cerr << summary;
  }
}

umi::LatencyProfile profile_from_json(const json& j) {
  umi::LatencyProfile p;
  p.l_camera = j.value("l_camera", 0.0);
  p.l_proprio = j.value("l_proprio", 0.0);
  p.l_gripper_exec = j.value("l_gripper_exec", 0.0);
  p.l_robot_exec = j.value("l_robot_exec", 0.0);
  p.validate();
  return p;
}

umi::TossParams toss_from_json(const json& j) {
  umi::TossParams p;
  p.travel = j.value("travel", p.travel);
  p.peak_speed = j.value("peak_speed", p.peak_speed);
  p.hold = j.value("hold", p.hold);
  p.height = j.value("height", p.height);
  p.width_closed = j.value("width_closed", p.width_closed);
  p.width_open = j.value("width_open", p.width_open);
  p.sample_rate = j.value("sample_rate", p.sample_rate);
  return p;
}

umi::SimConfig sim_config_from_json(const json& j) {
  umi::SimConfig cfg;
  if (j.contains("profile")) cfg.profile = profile_from_json(j["profile"]);
  if (j.contains("assumed_profile")) cfg.assumed_profile = profile_from_json(j["assumed_profile"]);
  cfg.freq = j.value("freq", cfg.freq);
  cfg.inference_delay = j.value("inference_delay", cfg.inference_delay);
  cfg.tracker_tau = j.value("tracker_tau", cfg.tracker_tau);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.camera_hz = j.value("camera_hz", cfg.camera_hz);
  cfg.proprio_hz = j.value("proprio_hz", cfg.proprio_hz);
  cfg.misalignment_max_lag = j.value("misalignment_max_lag", cfg.misalignment_max_lag);
  return cfg;
}

json load_json(const std::string& path) {
  auto f = umi::open_input(path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    umi::raise("parse", path + ": " + e.what());
  }
  return j;
}

ordered_json sim_report_to_json(const umi::SimReport& r) {
  return {{"temporal_misalignment", r.temporal_misalignment},
          {"tracking_rmse", r.tracking_rmse},
          {"release_time_error", r.release_time_error},
          {"jerk_mean", r.jerk_mean},
          {"robot_release_time", r.robot_release_time},
          {"gripper_release_time", r.gripper_release_time},
          {"reference_release_time", r.reference_release_time},
          {"chunks_emitted", r.chunks_emitted},
          {"commands_sent", r.commands_sent},
          {"reinference_events", r.reinference_events},
          {"seed", r.seed}};
}

// ---------------------------------------------------------------------------

int cmd_calibrate_latency(const std::string& commanded_path, const std::string& measured_path,
                          double max_lag, double resolution, const std::string& out_path) {
  umi::StreamHeader cmd_header;
  const auto commanded = umi::read_width_stream_file(commanded_path, &cmd_header);
  const auto measured = umi::read_width_stream_file(measured_path);

  umi::LagEstimate estimate;
  std::string probe_kind = cmd_header.extras.value("waveform", "");
  if (probe_kind == "sine" || probe_kind == "chirp") {
    umi::ProbeSignal probe;
    probe.stream = commanded;
    probe.kind = probe_kind == "sine" ? umi::ProbeKind::Sine : umi::ProbeKind::Chirp;
    probe.freq_start_hz = cmd_header.extras.value("freq_start_hz", 1.0);
    probe.freq_end_hz = cmd_header.extras.value("freq_end_hz", probe.freq_start_hz);
    probe.amplitude = cmd_header.extras.value("amplitude", 0.0);
    estimate = umi::estimate_lag(probe, measured, max_lag, resolution);
  } else {
    // No waveform metadata: run the grid estimator with the generic overlap
    // requirement instead of the probe-period rule.
    probe_kind = "unlabeled";
    estimate = umi::estimate_lag_grid(commanded, measured, max_lag, resolution,
                                      std::max(2.0 * max_lag, 10.0 * resolution));
  }

  ordered_json report;
  report["meta"] = meta_block();
  report["l_e2e"] = estimate.lag;
  report["score"] = estimate.score;
  report["method"] = "xcorr-grid+parabolic";
  report["probe"] = probe_kind;
  report["max_lag"] = max_lag;
  report["resolution"] = resolution;
  char line[160];
  std::snprintf(line, sizeof line, "l_e2e = %.4f s (score %.3f, %s probe)\n", estimate.lag,
                estimate.score, probe_kind.c_str());
  emit_report(report, out_path, line);
  return 0;
}

int cmd_ingest(const std::vector<std::string>& scene_dirs) {
  for (const std::string& dir : scene_dirs) {
    const umi::IngestResult result = umi::ingest_scene(dir);
    umi::write_episodes_json(dir, result, now_iso8601());
    std::size_t unpaired = 0, rejected = 0;
    for (const auto& row : result.accounting) {
      if (row.disposition == "unpaired") ++unpaired;
      if (row.disposition.rfind("rejected", 0) == 0) ++rejected;
    }
    std::cout << dir << ": " << result.episodes.size() << " episodes, " << unpaired
              << " unpaired, " << rejected << " rejected, " << result.calibrations.size()
              << " calibrations -> episodes.json\n";
  }
  return 0;
}

int cmd_filter(const std::string& model_path, const std::vector<std::string>& scene_dirs) {
  const std::vector<umi::KinematicModel> models = umi::read_kinematic_models(model_path);
  for (const std::string& dir : scene_dirs) {
    umi::IngestResult result = umi::ingest_scene(dir);
    umi::filter_episodes(&result, models);
    umi::write_episodes_json(dir, result, now_iso8601());
    for (const umi::Episode& ep : result.episodes) {
      std::cout << ep.id << ": " << ep.verdict
                << (ep.verdict_reason.empty() ? "" : " (" + ep.verdict_reason + ")") << "\n";
    }
  }
  return 0;
}

int cmd_export(const std::string& config_path, const std::string& out_dir,
               const std::vector<std::string>& scene_dirs) {
  const umi::ExportConfig config = umi::read_export_config(config_path);
  std::vector<umi::IngestResult> scenes;
  for (const std::string& dir : scene_dirs) {
    umi::IngestResult result = umi::ingest_scene(dir);
    umi::apply_recorded_verdicts(dir, &result);
    scenes.push_back(std::move(result));
  }
  const umi::ExportSummary summary = umi::export_dataset(scenes, config, out_dir, now_iso8601());
  std::cout << "exported " << summary.episodes_accepted << " episodes ("
            << summary.samples << " samples, " << summary.episodes_skipped
            << " skipped, " << summary.clamped_widths << " clamped widths) -> " << out_dir
            << "\n";
  return 0;
}

ordered_json ate_to_json(const umi::AteReport& r) {
  return {{"pos_mean", r.pos_mean},
          {"pos_rmse", r.pos_rmse},
          {"rot_mean_deg", r.rot_mean},
          {"rot_rmse_deg", r.rot_rmse},
          {"count", r.pos_residuals.size()}};
}

int cmd_eval_traj(const std::string& est_path, const std::string& gt_path,
                  const std::vector<std::string>& pair, bool with_scale,
                  const std::string& out_path) {
  const umi::PoseTrajectory est = umi::read_trajectory_file(est_path);
  const umi::PoseTrajectory gt = umi::read_trajectory_file(gt_path);
  const umi::AlignedAte primary = umi::ate_aligned(est, gt, with_scale);

  ordered_json report;
  report["meta"] = meta_block();
  report["alignment"] = {{"transform", umi::pose_to_json(primary.alignment.transform)},
                         {"residual_rmse", primary.alignment.residual_rmse},
                         {"scale", primary.alignment.scale}};
  report["ate"] = ate_to_json(primary.report);

  std::string summary;
  char line[160];
  std::snprintf(line, sizeof line, "ATE: pos mean %.4f m rmse %.4f m, rot mean %.2f deg (n=%zu)\n",
                primary.report.pos_mean, primary.report.pos_rmse, primary.report.rot_mean,
                primary.report.pos_residuals.size());
  summary += line;

  if (!pair.empty()) {
    const umi::PoseTrajectory est2 = umi::read_trajectory_file(pair[0]);
    const umi::PoseTrajectory gt2 = umi::read_trajectory_file(pair[1]);
    const umi::AlignedAte secondary = umi::ate_aligned(est2, gt2, with_scale);
    report["ate_second"] = ate_to_json(secondary.report);
    const umi::RpeReport rpe = umi::inter_gripper_rpe(est, est2, gt, gt2);
    report["inter_gripper_rpe"] = {{"pos_mean", rpe.pos_mean},
                                   {"rot_mean_deg", rpe.rot_mean},
                                   {"count", rpe.count}};
    std::snprintf(line, sizeof line, "inter-gripper RPE: pos mean %.4f m, rot mean %.2f deg (n=%zu)\n",
                  rpe.pos_mean, rpe.rot_mean, rpe.count);
    summary += line;
  }
  emit_report(report, out_path, summary);
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_path, long long seed,
                 const std::string& dispatch_log_path) {
  const json j = load_json(config_path);
  umi::SimConfig cfg = sim_config_from_json(j);
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  if (!cfg.profile.camera_is_max()) {
    std::cerr << "warning: camera is not the highest-latency stream in this profile\n";
  }
  const umi::TossProfile toss = umi::toss_profile(toss_from_json(j.value("toss", json::object())));
  std::vector<umi::Command> log;
  const umi::SimReport r =
      umi::simulate(toss, cfg, dispatch_log_path.empty() ? nullptr : &log);
  if (!dispatch_log_path.empty()) {
    auto f = umi::open_output(dispatch_log_path);
    umi::write_dispatch_log(f, log);
  }

  ordered_json report;
  report["meta"] = meta_block();
  report["report"] = sim_report_to_json(r);
  char line[200];
  std::snprintf(line, sizeof line,
                "misalignment %.3f s, tracking rmse %.4f m, release error %.3f s, jerk %.1f m/s^3\n",
                r.temporal_misalignment, r.tracking_rmse, r.release_time_error, r.jerk_mean);
  emit_report(report, out_path, line);
  return 0;
}

int cmd_sweep(const std::string& configs_path, const std::string& out_path) {
  const json j = load_json(configs_path);
  const umi::TossProfile toss = umi::toss_profile(toss_from_json(j.value("toss", json::object())));
  std::vector<umi::SimConfig> configs;
  std::vector<std::string> names;
  for (const json& c : j.value("configs", json::array())) {
    configs.push_back(sim_config_from_json(c));
    names.push_back(c.value("name", "cfg" + std::to_string(configs.size() - 1)));
  }
  const std::vector<umi::SimReport> reports = umi::sweep(toss.trajectory, toss.width, configs);

  auto f = umi::open_output(out_path);
  f << "name,l_camera,l_proprio,l_gripper_exec,l_robot_exec,assumed_l_camera,assumed_l_robot_exec,"
       "freq,inference_delay,tracker_tau,seed,temporal_misalignment,tracking_rmse,"
       "release_time_error,jerk_mean,chunks_emitted,commands_sent,reinference_events\n";
  f.precision(12);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const umi::SimConfig& c = configs[i];
    const umi::SimReport& r = reports[i];
    f << names[i] << ',' << c.profile.l_camera << ',' << c.profile.l_proprio << ','
      << c.profile.l_gripper_exec << ',' << c.profile.l_robot_exec << ','
      << c.assumed_profile.l_camera << ',' << c.assumed_profile.l_robot_exec << ',' << c.freq
      << ',' << c.inference_delay << ',' << c.tracker_tau << ',' << c.seed << ','
      << r.temporal_misalignment << ',' << r.tracking_rmse << ',' << r.release_time_error << ','
      << r.jerk_mean << ',' << r.chunks_emitted << ',' << r.commands_sent << ','
      << r.reinference_events << "\n";
  }
  std::cout << reports.size() << " rows -> " << out_path << "\n";
  return 0;
}

const char* schema_text(const std::string& type) {
  if (type == "stream") {
    return R"(JSONL stream file: one header object, then one sample per line.
  header: {"stream_id": str, "kind": "pose"|"width"|"frame", "latency": f64 s, "rate": f64 Hz, ...}
  pose:   {"t": f64 s, "pose": [x, y, z, qw, qx, qy, qz]}   (meters, unit quaternion)
  width:  {"t": f64 s, "width": f64 m}
  frame:  {"t": f64 s, "frame": str}
Pose headers carry "frame_id". Probe command headers may carry "waveform"
("sine"|"chirp"), "freq_start_hz", "freq_end_hz", "amplitude".
Timestamps are receive times; capture time = t - latency.)";
  }
  if (type == "demo") {
    return R"(Demo recording (kind "demo"): header
  {"stream_id": str, "kind": "demo", "latency": 0, "rate": f64, "frame_id": str, "serial": str}
then {"t","pose"} lines in the map frame interleaved with either
{"t","width"} lines (meters) or {"t","markers": [[lx,ly],[rx,ry]]} lines
(pixels; null entry = detection gap). This is the contract a SLAM front-end
must emit.)";
  }
  if (type == "scene-manifest") {
    return R"(<scene>/manifest.json:
  {"scene_id": str, "map_frame_id": str, "gripper_serials": [str, ...],
   "marker_cal": {"scale_m_per_px": f64, "offset_m": f64},
   "recordings": [{"file": str, "serial": str, "role": "mapping"|"calibration"|"demo"}, ...]}
Exactly one mapping recording per scene; serials unique.)";
  }
  if (type == "episodes") {
    return R"(<scene>/episodes.json (written by ingest, verdicts by filter):
  {"meta": {...}, "scene_id": str, "map_frame_id": str,
   "calibrations": {serial: {"width_min": f64, "width_max": f64}},
   "episodes": [{"id": str, "files": [{"serial","file"}], "verdict":
                 "pending"|"accepted"|"rejected", "reason": str}],
   "accounting": [{"file","serial","role","disposition"}],
   "clamped_width_samples": u64}
Every recording of the scene appears in accounting exactly once.)";
  }
  if (type == "kinematic-model") {
    return R"(model.json: either one model or {"arms": [model, model]}.
  model: {"base_pose": [x,y,z,qw,qx,qy,qz], "reach_min": f64, "reach_max": f64,
          "z_min": f64, "z_max": f64, "v_max": f64 m/s, "a_max": f64 m/s^2}
Speed and acceleration are checked with central differences.)";
  }
  if (type == "export-config") {
    return R"(export.json:
  {"freq": f64 Hz, "obs_horizon": u64, "action_horizon": u64,
   "repr": "relative_trajectory"|"delta"|"absolute", "global_frame": str}
"absolute" requires global_frame to name the shared map frame.)";
  }
  if (type == "dataset") {
    return R"(Dataset directory: manifest.json plus one episode_NNNNN.jsonl per
accepted episode. Episode header: {"episode_id","scene_id","map_frame_id",
"freq","obs_horizon","action_horizon","repr","serials"}. Sample lines:
  {"t_obs": f64, "arms": [{"serial", "anchor": pose7,
    "obs_t": [f64...], "obs_ee": [pose7...], "obs_width": [f64...],
    "action_t": [f64...], "action_poses": [pose7...], "action_widths": [f64...]}],
   "inter_gripper": pose7 (bimanual only)}
obs_ee is relative to the anchor (last = identity); action_poses follow the
configured representation.)";
  }
  if (type == "sim-config") {
    return R"(sim.json:
  {"profile": {"l_camera","l_proprio","l_gripper_exec","l_robot_exec"},
   "assumed_profile": {...}, "freq": f64, "inference_delay": f64,
   "tracker_tau": f64, "seed": u64, "camera_hz": f64, "proprio_hz": f64,
   "misalignment_max_lag": f64,
   "toss": {"travel","peak_speed","hold","height","width_closed","width_open","sample_rate"}}
Latency values are seconds. Setting assumed_profile to zeros ablates latency
matching. Defaults are plausible placeholders, not measurements of a rig.
For sweep: {"toss": {...}, "configs": [sim-config..., each may carry "name"]}.)";
  }
  if (type == "dispatch-log") {
    return R"(Dispatch log JSONL: one command per line,
  {"t_send": f64, "t_target": f64, "actuator": "robot", "pose": pose7}
  {"t_send": f64, "t_target": f64, "actuator": "gripper", "width": f64})";
  }
  return nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UMI deployment toolkit: latency calibration, demonstration ingestion, "
               "trajectory evaluation, and closed-loop latency simulation"};
  app.set_version_flag("--version", std::string("umi ") + umi::kVersion);

  std::string schema_type;
  app.add_option("--schema", schema_type,
                 "Print format documentation (stream, demo, scene-manifest, episodes, "
                 "kinematic-model, export-config, dataset, sim-config, dispatch-log)");

  // calibrate-latency
  auto* cal = app.add_subcommand("calibrate-latency",
                                 "End-to-end lag between a commanded probe and the measured response");
  std::string cal_cmd, cal_meas, cal_out;
  double cal_max_lag = 0.5, cal_resolution = 0.001;
  cal->add_option("--commanded", cal_cmd, "Commanded probe stream (JSONL)")->required();
  cal->add_option("--measured", cal_meas, "Measured response stream (JSONL)")->required();
  cal->add_option("--max-lag", cal_max_lag, "Largest lag searched, seconds");
  cal->add_option("--resolution", cal_resolution, "Lag grid step, seconds");
  cal->add_option("--out", cal_out, "Write the JSON report here instead of stdout");

  // ingest
  auto* ing = app.add_subcommand("ingest", "Load scene folders into episodes.json");
  std::vector<std::string> ing_dirs;
  ing->add_option("scene-dirs", ing_dirs, "Scene directories")->required()->expected(-1);

  // filter
  auto* flt = app.add_subcommand("filter", "Kinematic feasibility verdicts for every episode");
  std::string flt_model;
  std::vector<std::string> flt_dirs;
  flt->add_option("--model", flt_model, "Kinematic model JSON")->required();
  flt->add_option("scene-dirs", flt_dirs, "Scene directories")->required()->expected(-1);

  // export
  auto* exp = app.add_subcommand("export", "Export accepted episodes into a training dataset");
  std::string exp_config, exp_out;
  std::vector<std::string> exp_dirs;
  exp->add_option("--config", exp_config, "Export config JSON")->required();
  exp->add_option("--out", exp_out, "Output dataset directory")->required();
  exp->add_option("scene-dirs", exp_dirs, "Scene directories")->required()->expected(-1);

  // eval-traj
  auto* evt = app.add_subcommand("eval-traj", "ATE after rigid alignment; optional bimanual RPE");
  std::string evt_est, evt_gt, evt_out;
  std::vector<std::string> evt_pair;
  bool evt_scale = false;
  evt->add_option("--est", evt_est, "Estimated trajectory (JSONL pose stream)")->required();
  evt->add_option("--gt", evt_gt, "Ground-truth trajectory (JSONL pose stream)")->required();
  evt->add_option("--pair", evt_pair, "Second est and gt trajectory for inter-gripper RPE")
      ->expected(2);
  evt->add_flag("--with-scale", evt_scale, "Similarity alignment (diagnostic)");
  evt->add_option("--out", evt_out, "Write the JSON report here instead of stdout");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Closed-loop latency-matching simulation");
  std::string sim_config, sim_out, sim_dispatch_log;
  long long sim_seed = -1;
  sim->add_option("--config", sim_config, "Simulation config JSON")->required();
  sim->add_option("--out", sim_out, "Write the JSON report here instead of stdout");
  sim->add_option("--seed", sim_seed, "Override the config seed");
  sim->add_option("--dispatch-log", sim_dispatch_log, "Write the sent commands as JSONL");

  // sweep
  auto* swp = app.add_subcommand("sweep", "Run simulate for every config, emit CSV");
  std::string swp_configs, swp_out;
  swp->add_option("--configs", swp_configs, "Sweep config JSON")->required();
  swp->add_option("--out", swp_out, "Output CSV path")->required();

  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (!schema_type.empty()) {
      const char* text = schema_text(schema_type);
      if (!text) {
        std::cerr << "unknown schema type: " << schema_type << "\n";
        return 2;
      }
      std::cout << text << "\n";
      return 0;
    }
    if (cal->parsed()) {
      return cmd_calibrate_latency(cal_cmd, cal_meas, cal_max_lag, cal_resolution, cal_out);
    }
    if (ing->parsed()) return cmd_ingest(ing_dirs);
    if (flt->parsed()) return cmd_filter(flt_model, flt_dirs);
    if (exp->parsed()) return cmd_export(exp_config, exp_out, exp_dirs);
    if (evt->parsed()) return cmd_eval_traj(evt_est, evt_gt, evt_pair, evt_scale, evt_out);
    if (sim->parsed()) return cmd_simulate(sim_config, sim_out, sim_seed, sim_dispatch_log);
    if (swp->parsed()) return cmd_sweep(swp_configs, swp_out);
    std::cout << app.help();
    return 2;
  } catch (const umi::Error& e) {
    ordered_json err;
    err["error"] = {{"code", e.code()}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    ordered_json err;
    err["error"] = {{"code", "internal"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
