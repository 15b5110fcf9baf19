#pragma once

// Scene ingestion and dataset export.
//
// Scene directory layout:
//   <scene>/manifest.json          scene id, serials, map frame, recordings
//   <scene>/mapping.jsonl          pose stream defining the map frame
//   <scene>/calib_<serial>.jsonl   width stream, >= 5 open/close cycles
//   <scene>/demo_*.jsonl           kind "demo": pose + width (or marker) lines
//   <scene>/episodes.json          written by ingest, verdicts added by filter
//
// A SLAM front-end feeding this pipeline must emit demo files with a header
// {"kind": "demo", "frame_id": <map frame>, "serial": ...} followed by
// strictly time-ordered {"t", "pose"} lines in the map frame and either
// {"t", "width"} lines in meters or {"t", "markers": [[lx,ly],[rx,ry]]}
// lines in pixels (null marker = detection gap, bridged by interpolation).

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "umi/error.hpp"
#include "umi/jsonl.hpp"
#include "umi/pipeline.hpp"
#include "umi/se3.hpp"
#include "umi/stream.hpp"
#include "umi/version.hpp"

namespace umi {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Demo recording files.

struct DemoStreams {
  std::string serial;
  std::string frame_id;
  PoseTrajectory ee;
  TimedStream<double> width;
  std::size_t clamped_widths = 0;
};

inline DemoStreams read_demo_file(const std::string& path, const PixelToMeter& marker_cal) {
  auto f = open_input(path);
  std::string line;
  if (!std::getline(f, line)) raise("parse", path + ": empty demo file");
  const StreamHeader header = parse_stream_header(line);
  if (header.kind != "demo") {
    raise("parse", path + ": expected kind 'demo', found '" + header.kind + "'");
  }
  DemoStreams out;
  out.serial = header.extras.value("serial", "");
  out.frame_id = header.extras.value("frame_id", "");
  out.ee.frame_id = out.frame_id;
  out.width.stream_id = header.stream_id + ":width";
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      raise("parse", path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.contains("t")) raise("parse", path + ":" + std::to_string(line_no) + ": missing t");
    const double t = j["t"].get<double>();
    if (j.contains("pose")) {
      out.ee.samples.push_back({t, pose_from_json(j["pose"])});
    } else if (j.contains("width")) {
      out.width.samples.push_back({t, j["width"].get<double>()});
    } else if (j.contains("markers")) {
      const json& m = j["markers"];
      if (!m.is_array() || m.size() != 2) {
        raise("parse", path + ":" + std::to_string(line_no) + ": markers must be a 2-array");
      }
      if (m[0].is_null() || m[1].is_null()) continue;  // detection gap
      const Eigen::Vector2d l(m[0][0].get<double>(), m[0][1].get<double>());
      const Eigen::Vector2d r(m[1][0].get<double>(), m[1][1].get<double>());
      const WidthSample w = width_from_markers(l, r, marker_cal);
      if (w.clamped) ++out.clamped_widths;
      out.width.samples.push_back({t, w.width});
    } else {
      raise("parse", path + ":" + std::to_string(line_no) + ": expected pose, width, or markers");
    }
  }
  out.ee.validate();
  out.width.validate();
  if (out.ee.empty() || out.width.empty()) {
    raise("parse", path + ": demo needs both pose and width samples");
  }
  return out;
}

inline void write_demo_file(const std::string& path, const std::string& stream_id,
                            const std::string& serial, const PoseTrajectory& ee,
                            const TimedStream<double>& width) {
  auto f = open_output(path);
  StreamHeader h;
  h.stream_id = stream_id;
  h.kind = "demo";
  h.extras["frame_id"] = ee.frame_id;
  h.extras["serial"] = serial;
  f << header_to_json(h).dump() << "\n";
  // Merge the two sample sets in time order.
  std::size_t i = 0, j = 0;
  while (i < ee.size() || j < width.size()) {
    const bool take_pose =
        j >= width.size() || (i < ee.size() && ee.samples[i].t <= width.samples[j].t);
    if (take_pose) {
      detail::write_sample_line(f, ee.samples[i].t, "pose", pose_to_json(ee.samples[i].pose));
      ++i;
    } else {
      detail::write_sample_line(f, width.samples[j].t, "width", json(width.samples[j].value));
      ++j;
    }
  }
}

// ---------------------------------------------------------------------------
// Scene manifest.

struct SceneConfig {
  SessionManifest manifest;
  PixelToMeter marker_cal;
};

inline SceneConfig read_scene_manifest(const std::string& scene_dir) {
  const std::string path = (fs::path(scene_dir) / "manifest.json").string();
  auto f = open_input(path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    raise("parse", path + ": " + e.what());
  }
  SceneConfig cfg;
  cfg.manifest.scene_id = j.value("scene_id", "");
  cfg.manifest.map_frame_id = j.value("map_frame_id", "");
  cfg.manifest.gripper_serials = j.value("gripper_serials", std::vector<std::string>{});
  if (j.contains("marker_cal")) {
    cfg.marker_cal.scale_m_per_px = j["marker_cal"].value("scale_m_per_px", 0.0001);
    cfg.marker_cal.offset_m = j["marker_cal"].value("offset_m", 0.0);
  }
  for (const json& r : j.value("recordings", json::array())) {
    Recording rec;
    rec.file = r.value("file", "");
    rec.serial = r.value("serial", "");
    rec.role = recording_role_from_string(r.value("role", ""));
    cfg.manifest.recordings.push_back(rec);
  }
  cfg.manifest.validate();
  return cfg;
}

inline void write_scene_manifest(const std::string& scene_dir, const SceneConfig& cfg) {
  ordered_json j;
  j["scene_id"] = cfg.manifest.scene_id;
  j["map_frame_id"] = cfg.manifest.map_frame_id;
  j["gripper_serials"] = cfg.manifest.gripper_serials;
  j["marker_cal"] = {{"scale_m_per_px", cfg.marker_cal.scale_m_per_px},
                     {"offset_m", cfg.marker_cal.offset_m}};
  j["recordings"] = json::array();
  for (const Recording& r : cfg.manifest.recordings) {
    j["recordings"].push_back(
        {{"file", r.file}, {"serial", r.serial}, {"role", to_string(r.role)}});
  }
  auto f = open_output((fs::path(scene_dir) / "manifest.json").string());
  f << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Ingestion.

struct AccountingRow {
  std::string file;
  std::string serial;
  std::string role;
  std::string disposition;  // mapping | calibration | episode <id> | unpaired | rejected(<why>)
};

struct IngestResult {
  std::string scene_id;
  std::string map_frame_id;
  std::map<std::string, GripperCalibration> calibrations;
  std::vector<Episode> episodes;
  std::vector<AccountingRow> accounting;
  std::size_t clamped_width_samples = 0;
};

/** Load a scene folder into episodes.
 *
 * Every recording ends up in the accounting exactly once: the mapping and
 * calibration recordings by role, each demo either in an episode, unpaired,
 * or rejected with the reason. Demo streams not in the scene's map frame are
 * rejected here because nothing downstream can use them.
 */
inline IngestResult ingest_scene(const std::string& scene_dir) {
  const SceneConfig cfg = read_scene_manifest(scene_dir);
  IngestResult result;
  result.scene_id = cfg.manifest.scene_id;
  result.map_frame_id = cfg.manifest.map_frame_id;

  std::vector<Recording> demos;
  std::map<std::string, DemoStreams> demo_streams;  // by file
  for (const Recording& rec : cfg.manifest.recordings) {
    const std::string path = (fs::path(scene_dir) / rec.file).string();
    switch (rec.role) {
      case RecordingRole::Mapping: {
        StreamHeader h;
        read_pose_stream_file(path, &h);
        if (h.extras.value("frame_id", "") != cfg.manifest.map_frame_id) {
          raise("frame_mismatch", path + ": mapping recording is not in the declared map frame");
        }
        result.accounting.push_back({rec.file, rec.serial, "mapping", "mapping"});
        break;
      }
      case RecordingRole::Calibration: {
        GripperCalibration cal = calibrate_gripper(read_width_stream_file(path));
        cal.serial = rec.serial;
        result.calibrations[rec.serial] = cal;
        result.accounting.push_back({rec.file, rec.serial, "calibration", "calibration"});
        break;
      }
      case RecordingRole::Demo: {
        DemoStreams streams = read_demo_file(path, cfg.marker_cal);
        result.clamped_width_samples += streams.clamped_widths;
        if (streams.frame_id != cfg.manifest.map_frame_id) {
          result.accounting.push_back({rec.file, rec.serial, "demo", "rejected(frame-mismatch)"});
          break;
        }
        Recording timed = rec;
        timed.t_start = std::min(streams.ee.samples.front().t, streams.width.samples.front().t);
        timed.t_end = std::max(streams.ee.samples.back().t, streams.width.samples.back().t);
        demos.push_back(timed);
        demo_streams[rec.file] = std::move(streams);
        break;
      }
    }
  }

  const auto make_arm = [&](const Recording& rec) {
    EpisodeArm arm;
    DemoStreams& s = demo_streams[rec.file];
    arm.serial = rec.serial;
    arm.ee = std::move(s.ee);
    arm.width = std::move(s.width);
    arm.source_file = rec.file;
    return arm;
  };
  const auto episode_id = [&](std::size_t k) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%03zu", k);
    return result.scene_id + "/" + buf;
  };

  if (cfg.manifest.gripper_serials.size() == 2) {
    SessionManifest timed = cfg.manifest;
    timed.recordings.clear();
    for (const Recording& r : cfg.manifest.recordings) {
      if (r.role != RecordingRole::Demo) timed.recordings.push_back(r);
    }
    timed.recordings.insert(timed.recordings.end(), demos.begin(), demos.end());
    PairingResult pairing = pair_bimanual(timed);
    std::stable_sort(pairing.pairs.begin(), pairing.pairs.end(),
                     [](const RecordingPair& a, const RecordingPair& b) {
                       return a.left.t_start < b.left.t_start;
                     });
    for (std::size_t k = 0; k < pairing.pairs.size(); ++k) {
      Episode ep;
      ep.id = episode_id(k);
      ep.scene_id = result.scene_id;
      ep.map_frame_id = result.map_frame_id;
      ep.arms.push_back(make_arm(pairing.pairs[k].left));
      ep.arms.push_back(make_arm(pairing.pairs[k].right));
      ep.validate();
      result.accounting.push_back(
          {pairing.pairs[k].left.file, pairing.pairs[k].left.serial, "demo", "episode " + ep.id});
      result.accounting.push_back({pairing.pairs[k].right.file, pairing.pairs[k].right.serial,
                                   "demo", "episode " + ep.id});
      result.episodes.push_back(std::move(ep));
    }
    for (const Recording& r : pairing.unpaired) {
      result.accounting.push_back({r.file, r.serial, "demo", "unpaired"});
    }
  } else {
    std::stable_sort(demos.begin(), demos.end(),
                     [](const Recording& a, const Recording& b) { return a.t_start < b.t_start; });
    for (std::size_t k = 0; k < demos.size(); ++k) {
      Episode ep;
      ep.id = episode_id(k);
      ep.scene_id = result.scene_id;
      ep.map_frame_id = result.map_frame_id;
      ep.arms.push_back(make_arm(demos[k]));
      ep.validate();
      result.accounting.push_back({demos[k].file, demos[k].serial, "demo", "episode " + ep.id});
      result.episodes.push_back(std::move(ep));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// episodes.json: the ingest -> filter -> export hand-off.

inline ordered_json episodes_to_json(const IngestResult& result, const std::string& created) {
  ordered_json j;
  j["meta"] = {{"tool", "umi"}, {"version", kVersion}, {"created", created}};
  j["scene_id"] = result.scene_id;
  j["map_frame_id"] = result.map_frame_id;
  j["calibrations"] = ordered_json::object();
  for (const auto& [serial, cal] : result.calibrations) {
    j["calibrations"][serial] = {{"width_min", cal.width_min}, {"width_max", cal.width_max}};
  }
  j["episodes"] = json::array();
  for (const Episode& ep : result.episodes) {
    ordered_json files = json::array();
    for (const EpisodeArm& arm : ep.arms) {
      files.push_back({{"serial", arm.serial}, {"file", arm.source_file}});
    }
    j["episodes"].push_back({{"id", ep.id},
                             {"files", files},
                             {"verdict", ep.verdict},
                             {"reason", ep.verdict_reason}});
  }
  j["accounting"] = json::array();
  for (const AccountingRow& row : result.accounting) {
    j["accounting"].push_back({{"file", row.file},
                               {"serial", row.serial},
                               {"role", row.role},
                               {"disposition", row.disposition}});
  }
  j["clamped_width_samples"] = result.clamped_width_samples;
  return j;
}

inline void write_episodes_json(const std::string& scene_dir, const IngestResult& result,
                                const std::string& created = "") {
  auto f = open_output((fs::path(scene_dir) / "episodes.json").string());
  f << episodes_to_json(result, created).dump(2) << "\n";
}

// Applies recorded verdicts from an existing episodes.json onto a fresh
// ingest (matched by episode id).
inline void apply_recorded_verdicts(const std::string& scene_dir, IngestResult* result) {
  const std::string path = (fs::path(scene_dir) / "episodes.json").string();
  if (!fs::exists(path)) return;
  auto f = open_input(path);
  json j;
  f >> j;
  std::map<std::string, std::pair<std::string, std::string>> verdicts;
  for (const json& ep : j.value("episodes", json::array())) {
    verdicts[ep.value("id", "")] = {ep.value("verdict", "pending"), ep.value("reason", "")};
  }
  for (Episode& ep : result->episodes) {
    const auto it = verdicts.find(ep.id);
    if (it != verdicts.end()) {
      ep.verdict = it->second.first;
      ep.verdict_reason = it->second.second;
    }
  }
}

inline void filter_episodes(IngestResult* result, const std::vector<KinematicModel>& models) {
  for (Episode& ep : result->episodes) {
    const FilterVerdict v = kinematic_filter(ep, models);
    ep.verdict = v.accepted ? "accepted" : "rejected";
    ep.verdict_reason = v.code;
    if (!v.accepted) ep.verdict_reason += v.detail.empty() ? "" : (": " + v.detail);
  }
}

inline std::vector<KinematicModel> read_kinematic_models(const std::string& path) {
  auto f = open_input(path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    raise("parse", path + ": " + e.what());
  }
  const auto parse_one = [](const json& m) {
    KinematicModel model;
    if (m.contains("base_pose")) model.base_pose = pose_from_json(m["base_pose"]);
    model.reach_min = m.value("reach_min", model.reach_min);
    model.reach_max = m.value("reach_max", model.reach_max);
    model.z_min = m.value("z_min", model.z_min);
    model.z_max = m.value("z_max", model.z_max);
    model.v_max = m.value("v_max", model.v_max);
    model.a_max = m.value("a_max", model.a_max);
    model.validate();
    return model;
  };
  std::vector<KinematicModel> models;
  if (j.contains("arms")) {
    for (const json& m : j["arms"]) models.push_back(parse_one(m));
  } else {
    models.push_back(parse_one(j));
  }
  if (models.empty()) raise("bad_argument", path + ": no kinematic models");
  return models;
}

// ---------------------------------------------------------------------------
// Export.

struct ExportConfig {
  double freq = 10.0;
  std::size_t obs_horizon = 2;
  std::size_t action_horizon = 6;
  ActionRepr repr = ActionRepr::RelativeTrajectory;
  std::string global_frame;  // must name the shared frame for Absolute

  void validate() const {
    if (freq <= 0.0 || obs_horizon < 1 || action_horizon < 1) {
      raise("bad_argument", "export config: freq and horizons must be positive");
    }
    if (repr == ActionRepr::Absolute && global_frame.empty()) {
      raise("missing_global_frame",
            "export config: absolute actions need a declared global frame; relative "
            "representations work without one");
    }
  }
};

inline ExportConfig read_export_config(const std::string& path) {
  auto f = open_input(path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    raise("parse", path + ": " + e.what());
  }
  ExportConfig cfg;
  cfg.freq = j.value("freq", cfg.freq);
  cfg.obs_horizon = j.value("obs_horizon", cfg.obs_horizon);
  cfg.action_horizon = j.value("action_horizon", cfg.action_horizon);
  cfg.repr = action_repr_from_string(j.value("repr", "relative_trajectory"));
  cfg.global_frame = j.value("global_frame", "");
  cfg.validate();
  return cfg;
}

struct ArmSample {
  std::string serial;
  Pose anchor;  // absolute pose at t_obs in the map frame
  std::vector<TimedSample<Pose>> obs_ee;      // relative history, last = identity
  std::vector<TimedSample<double>> obs_width;
  std::vector<ActionStep> action;  // poses in the configured representation
};

struct TrainingSample {
  double t_obs = 0.0;
  std::vector<ArmSample> arms;
  std::optional<Pose> inter_gripper;  // bimanual episodes only
};

struct EpisodeSamples {
  std::string episode_id;
  std::vector<TrainingSample> samples;
  std::size_t clamped_widths = 0;
};

/** Resample one accepted episode onto the fixed training grid.
 *
 * Anchors step at 1/freq; every sample carries the full observation window
 * behind it and the full action horizon ahead, so the usable anchor count is
 * floor((duration - window) / dt) + 1 with
 * window = (obs_horizon - 1 + action_horizon - 1) * dt.
 */
inline EpisodeSamples export_episode(const Episode& episode,
                                     const std::map<std::string, GripperCalibration>& calibrations,
                                     const ExportConfig& config) {
  config.validate();
  episode.validate();
  if (config.repr == ActionRepr::Absolute && config.global_frame != episode.map_frame_id) {
    raise("frame_mismatch", "export: global frame '" + config.global_frame +
                                "' does not match episode frame '" + episode.map_frame_id + "'");
  }

  struct ArmStreams {
    const EpisodeArm* arm;
    TimedStream<Pose> ee;
    const GripperCalibration* cal;
  };
  std::vector<ArmStreams> streams;
  double t0 = -1e300, t1 = 1e300;
  for (const EpisodeArm& arm : episode.arms) {
    const auto it = calibrations.find(arm.serial);
    if (it == calibrations.end()) {
      raise("bad_argument", "export: no gripper calibration for serial " + arm.serial);
    }
    ArmStreams s{&arm, to_stream(arm.ee, arm.serial), &it->second};
    t0 = std::max({t0, arm.ee.samples.front().t, arm.width.samples.front().t});
    t1 = std::min({t1, arm.ee.samples.back().t, arm.width.samples.back().t});
    streams.push_back(std::move(s));
  }

  EpisodeSamples out;
  out.episode_id = episode.id;
  const double dt = 1.0 / config.freq;
  const double window =
      (static_cast<double>(config.obs_horizon - 1) + static_cast<double>(config.action_horizon - 1)) * dt;
  const double duration = t1 - t0;
  if (duration < window) return out;  // too short for a single sample
  const std::size_t count = static_cast<std::size_t>(std::floor((duration - window) / dt)) + 1;

  for (std::size_t k = 0; k < count; ++k) {
    const double t_obs = t0 + static_cast<double>(config.obs_horizon - 1) * dt +
                         static_cast<double>(k) * dt;
    TrainingSample sample;
    sample.t_obs = t_obs;
    for (const ArmStreams& s : streams) {
      ArmSample arm_sample;
      arm_sample.serial = s.arm->serial;
      arm_sample.anchor = sample_at(s.ee, t_obs);

      PoseTrajectory history;
      history.frame_id = episode.map_frame_id;
      for (std::size_t h = config.obs_horizon; h-- > 0;) {
        const double t = t_obs - static_cast<double>(h) * dt;
        history.samples.push_back({t, sample_at(s.ee, t)});
        arm_sample.obs_width.push_back({t, sample_at(s.arm->width, t)});
      }
      const PoseTrajectory rel = relative_proprioception(history);
      for (const auto& hs : rel.samples) arm_sample.obs_ee.push_back({hs.t, hs.pose});

      Pose previous = arm_sample.anchor;
      for (std::size_t a = 0; a < config.action_horizon; ++a) {
        const double t = t_obs + static_cast<double>(a) * dt;
        const Pose absolute = sample_at(s.ee, t);
        Pose repr_pose;
        switch (config.repr) {
          case ActionRepr::RelativeTrajectory:
            repr_pose = compose(inverse(arm_sample.anchor), absolute);
            break;
          case ActionRepr::Delta:
            repr_pose = compose(inverse(previous), absolute);
            break;
          case ActionRepr::Absolute:
            repr_pose = absolute;
            break;
        }
        previous = absolute;
        double width = sample_at(s.arm->width, t);
        const double clamped = std::clamp(width, s.cal->width_min, s.cal->width_max);
        if (clamped != width) ++out.clamped_widths;
        arm_sample.action.push_back({t, repr_pose, clamped});
      }
      sample.arms.push_back(std::move(arm_sample));
    }
    if (episode.bimanual()) {
      sample.inter_gripper =
          inter_gripper_pose(sample.arms[0].anchor, sample.arms[1].anchor);
    }
    out.samples.push_back(std::move(sample));
  }
  return out;
}

inline void write_episode_samples(const std::string& path, const EpisodeSamples& samples,
                                  const Episode& episode, const ExportConfig& config) {
  auto f = open_output(path);
  ordered_json header;
  header["episode_id"] = samples.episode_id;
  header["scene_id"] = episode.scene_id;
  header["map_frame_id"] = episode.map_frame_id;
  header["freq"] = config.freq;
  header["obs_horizon"] = config.obs_horizon;
  header["action_horizon"] = config.action_horizon;
  header["repr"] = to_string(config.repr);
  ordered_json serials = json::array();
  for (const EpisodeArm& arm : episode.arms) serials.push_back(arm.serial);
  header["serials"] = serials;
  f << header.dump() << "\n";

  for (const TrainingSample& sample : samples.samples) {
    ordered_json line;
    line["t_obs"] = sample.t_obs;
    line["arms"] = json::array();
    for (const ArmSample& arm : sample.arms) {
      ordered_json a;
      a["serial"] = arm.serial;
      a["anchor"] = pose_to_json(arm.anchor);
      ordered_json obs_t = ordered_json::array(), obs_ee = ordered_json::array(),
                   obs_w = ordered_json::array();
      for (const auto& s : arm.obs_ee) {
        obs_t.push_back(s.t);
        obs_ee.push_back(pose_to_json(s.value));
      }
      for (const auto& s : arm.obs_width) obs_w.push_back(s.value);
      a["obs_t"] = obs_t;
      a["obs_ee"] = obs_ee;
      a["obs_width"] = obs_w;
      ordered_json act_t = ordered_json::array(), act_p = ordered_json::array(),
                   act_w = ordered_json::array();
      for (const ActionStep& s : arm.action) {
        act_t.push_back(s.t_target);
        act_p.push_back(pose_to_json(s.rel_pose));
        act_w.push_back(s.width);
      }
      a["action_t"] = act_t;
      a["action_poses"] = act_p;
      a["action_widths"] = act_w;
      line["arms"].push_back(std::move(a));
    }
    if (sample.inter_gripper) line["inter_gripper"] = pose_to_json(*sample.inter_gripper);
    f << line.dump() << "\n";
  }
}

inline EpisodeSamples read_episode_samples(const std::string& path) {
  auto f = open_input(path);
  std::string line;
  if (!std::getline(f, line)) raise("parse", path + ": empty episode file");
  const json header = json::parse(line);
  EpisodeSamples out;
  out.episode_id = header.value("episode_id", "");
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    TrainingSample sample;
    sample.t_obs = j["t_obs"].get<double>();
    for (const json& a : j["arms"]) {
      ArmSample arm;
      arm.serial = a.value("serial", "");
      arm.anchor = pose_from_json(a["anchor"]);
      for (std::size_t i = 0; i < a["obs_t"].size(); ++i) {
        arm.obs_ee.push_back({a["obs_t"][i].get<double>(), pose_from_json(a["obs_ee"][i])});
        arm.obs_width.push_back({a["obs_t"][i].get<double>(), a["obs_width"][i].get<double>()});
      }
      for (std::size_t i = 0; i < a["action_t"].size(); ++i) {
        arm.action.push_back({a["action_t"][i].get<double>(), pose_from_json(a["action_poses"][i]),
                              a["action_widths"][i].get<double>()});
      }
      sample.arms.push_back(std::move(arm));
    }
    if (j.contains("inter_gripper")) sample.inter_gripper = pose_from_json(j["inter_gripper"]);
    out.samples.push_back(std::move(sample));
  }
  return out;
}

struct ExportSummary {
  std::size_t episodes_accepted = 0;
  std::size_t episodes_skipped = 0;  // rejected or still pending
  std::size_t samples = 0;
  std::size_t clamped_widths = 0;
};

/** Export every accepted episode of the given scenes into out_dir.
 *
 * Rejected and pending episodes are recorded in the manifest but produce no
 * sample files. Zero accepted episodes still produces a valid manifest.
 */
inline ExportSummary export_dataset(const std::vector<IngestResult>& scenes,
                                    const ExportConfig& config, const std::string& out_dir,
                                    const std::string& created = "") {
  config.validate();
  fs::create_directories(out_dir);
  ExportSummary summary;
  ordered_json manifest;
  manifest["meta"] = {{"tool", "umi"}, {"version", kVersion}, {"created", created}};
  manifest["config"] = {{"freq", config.freq},
                        {"obs_horizon", config.obs_horizon},
                        {"action_horizon", config.action_horizon},
                        {"repr", to_string(config.repr)},
                        {"global_frame", config.global_frame}};
  manifest["episodes"] = json::array();

  std::size_t file_index = 0;
  for (const IngestResult& scene : scenes) {
    for (const Episode& ep : scene.episodes) {
      ordered_json entry;
      entry["id"] = ep.id;
      entry["scene_id"] = ep.scene_id;
      ordered_json serials = json::array();
      for (const EpisodeArm& arm : ep.arms) serials.push_back(arm.serial);
      entry["serials"] = serials;
      entry["verdict"] = ep.verdict;
      entry["reason"] = ep.verdict_reason;
      if (ep.verdict == "accepted") {
        const EpisodeSamples samples = export_episode(ep, scene.calibrations, config);
        char buf[24];
        std::snprintf(buf, sizeof buf, "%05zu", file_index++);
        const std::string file = "episode_" + std::string(buf) + ".jsonl";
        write_episode_samples((fs::path(out_dir) / file).string(), samples, ep, config);
        entry["samples"] = samples.samples.size();
        entry["file"] = file;
        ++summary.episodes_accepted;
        summary.samples += samples.samples.size();
        summary.clamped_widths += samples.clamped_widths;
      } else {
        entry["samples"] = 0;
        ++summary.episodes_skipped;
      }
      manifest["episodes"].push_back(std::move(entry));
    }
  }
  manifest["counts"] = {{"episodes_accepted", summary.episodes_accepted},
                        {"episodes_skipped", summary.episodes_skipped},
                        {"samples", summary.samples},
                        {"clamped_widths", summary.clamped_widths}};
  auto f = open_output((fs::path(out_dir) / "manifest.json").string());
  f << manifest.dump(2) << "\n";
  return summary;
}

}  // namespace umi
