#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "umi/error.hpp"
#include "umi/se3.hpp"
#include "umi/stream.hpp"

namespace umi {

/** Measured latencies of one deployment, in seconds.
 *
 * l_camera and l_proprio are observation latencies (capture to availability);
 * l_gripper_exec and l_robot_exec are execution latencies (command sent to
 * actuator acting). The camera is normally the slowest observation stream;
 * a profile violating that is suspicious but not invalid.
 */
struct LatencyProfile {
  double l_camera = 0.0;
  double l_proprio = 0.0;
  double l_gripper_exec = 0.0;
  double l_robot_exec = 0.0;

  void validate() const {
    for (double v : {l_camera, l_proprio, l_gripper_exec, l_robot_exec}) {
      if (!std::isfinite(v) || v < 0.0) {
        raise("bad_argument", "latency profile values must be finite and >= 0");
      }
    }
  }

  bool camera_is_max() const {
    return l_camera >= l_proprio && l_camera >= l_gripper_exec && l_camera >= l_robot_exec;
  }

  double max_exec() const { return std::max(l_gripper_exec, l_robot_exec); }
};

// ---------------------------------------------------------------------------
// Camera latency from rolling-timestamp decodes.

struct CameraLatencyResult {
  double latency = 0.0;  // median over decodes
  double spread = 0.0;   // max - min of per-decode values
  std::size_t count = 0;
};

// One decode: the wall time a frame was received and the timestamp that was
// on the display inside that frame.
struct QrDecode {
  double t_recv = 0.0;
  double t_display = 0.0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  if (n % 2 == 1) return v[mid];
  const double upper = v[mid];
  std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
  return 0.5 * (v[mid - 1] + upper);
}

}  // namespace detail

/** l_camera = median over decodes of (t_recv - t_display - l_display). */
inline CameraLatencyResult camera_latency(const std::vector<QrDecode>& decodes, double l_display) {
  if (decodes.empty()) raise("empty_input", "camera_latency: no decodes");
  std::vector<double> values;
  values.reserve(decodes.size());
  for (const QrDecode& d : decodes) {
    if (d.t_recv - d.t_display < 0.0) {
      raise("clock_skew", "camera_latency: decode received before it was displayed (t_recv=" +
                              std::to_string(d.t_recv) + ", t_display=" + std::to_string(d.t_display) + ")");
    }
    values.push_back(d.t_recv - d.t_display - l_display);
  }
  CameraLatencyResult r;
  r.count = values.size();
  r.latency = detail::median_of(values);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  r.spread = *hi - *lo;
  return r;
}

// ---------------------------------------------------------------------------
// Proprioception latency.

inline double proprio_latency(double t_robot, double t_recv) {
  if (t_recv < t_robot) {
    raise("clock_skew", "proprio_latency: received before the robot sent it");
  }
  return t_recv - t_robot;
}

// Fallback when the hardware does not report timestamps: half the ICMP
// round-trip time.
inline double half_rtt(double rtt) {
  if (rtt < 0.0) raise("bad_argument", "half_rtt: negative round-trip time");
  return 0.5 * rtt;
}

inline double proprio_latency_median(const std::vector<std::pair<double, double>>& robot_recv_pairs) {
  if (robot_recv_pairs.empty()) raise("empty_input", "proprio_latency_median: no samples");
  std::vector<double> values;
  values.reserve(robot_recv_pairs.size());
  for (const auto& [t_robot, t_recv] : robot_recv_pairs) {
    values.push_back(proprio_latency(t_robot, t_recv));
  }
  return detail::median_of(values);
}

// ---------------------------------------------------------------------------
// End-to-end lag by normalized cross-correlation on a lag grid.

enum class ProbeKind { Sine, Chirp };

/** A commanded probe signal plus the metadata the estimator needs. */
struct ProbeSignal {
  TimedStream<double> stream;
  ProbeKind kind = ProbeKind::Sine;
  double freq_start_hz = 0.0;
  double freq_end_hz = 0.0;
  double amplitude = 0.0;

  // Longest period present; overlap requirements are stated against this.
  double base_period() const { return 1.0 / std::min(freq_start_hz, freq_end_hz); }
  bool periodic() const { return kind == ProbeKind::Sine; }
};

struct ProbeParams {
  double freq_start_hz = 1.0;
  double freq_end_hz = 1.0;  // == freq_start_hz for a sine
  double duration_s = 5.0;
  double sample_rate_hz = 100.0;
  double amplitude = 1.0;
  double offset = 0.0;  // additive center value, e.g. mid gripper width
};

/** Deterministic sine or linear-chirp probe.
 *
 * Sampling must be at least 10x the fastest frequency in the probe.
 */
inline ProbeSignal generate_probe(ProbeKind kind, const ProbeParams& p) {
  if (p.freq_start_hz <= 0.0 || p.freq_end_hz <= 0.0 || p.duration_s <= 0.0 ||
      p.sample_rate_hz <= 0.0) {
    raise("bad_argument", "generate_probe: frequencies, duration, and rate must be positive");
  }
  const double f_max = std::max(p.freq_start_hz, p.freq_end_hz);
  if (p.sample_rate_hz < 10.0 * f_max) {
    raise("bad_argument", "generate_probe: sampling rate must be >= 10x the probe frequency");
  }
  ProbeSignal probe;
  probe.kind = kind;
  probe.freq_start_hz = p.freq_start_hz;
  probe.freq_end_hz = (kind == ProbeKind::Sine) ? p.freq_start_hz : p.freq_end_hz;
  probe.amplitude = p.amplitude;
  probe.stream.stream_id = (kind == ProbeKind::Sine) ? "probe:sine" : "probe:chirp";
  probe.stream.rate_hz = p.sample_rate_hz;
  const std::size_t n = static_cast<std::size_t>(std::floor(p.duration_s * p.sample_rate_hz));
  probe.stream.samples.reserve(n);
  const double dt = 1.0 / p.sample_rate_hz;
  const double sweep = (probe.freq_end_hz - probe.freq_start_hz) / p.duration_s;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * dt;
    // Instantaneous frequency f0 + sweep*t; phase is its integral.
    const double phase = 2.0 * M_PI * (probe.freq_start_hz * t + 0.5 * sweep * t * t);
    probe.stream.samples.push_back({t, p.offset + p.amplitude * std::sin(phase)});
  }
  return probe;
}

struct LagEstimate {
  double lag = 0.0;    // seconds, in [0, max_lag]
  double score = 0.0;  // peak normalized correlation
};

namespace detail {

// Normalized cross-correlation between a reference scalar stream and a
// measured stream evaluated at reference times shifted by +lag. The window
// [w0, w1] is in the reference's capture timeline and fixed across lags so
// scores stay comparable.
inline double normalized_correlation(const TimedStream<double>& reference,
                                     const TimedStream<double>& measured, double lag, double w0,
                                     double w1) {
  double sum_c = 0.0, sum_m = 0.0;
  std::size_t n = 0;
  for (const auto& s : reference.samples) {
    const double t = s.t - reference.latency;
    if (t < w0 || t > w1) continue;
    sum_c += s.value;
    sum_m += sample_at(measured, t + lag);
    ++n;
  }
  if (n < 3) return 0.0;
  const double mean_c = sum_c / static_cast<double>(n);
  const double mean_m = sum_m / static_cast<double>(n);
  double num = 0.0, den_c = 0.0, den_m = 0.0;
  for (const auto& s : reference.samples) {
    const double t = s.t - reference.latency;
    if (t < w0 || t > w1) continue;
    const double c = s.value - mean_c;
    const double m = sample_at(measured, t + lag) - mean_m;
    num += c * m;
    den_c += c * c;
    den_m += m * m;
  }
  const double den = std::sqrt(den_c * den_m);
  if (den <= 0.0) return 0.0;
  return num / den;
}

}  // namespace detail

/** Grid search over [0, max_lag] plus parabolic refinement of the peak.
 *
 * The workhorse behind estimate_lag and robot_exec_latency; usable directly
 * for signals without probe metadata. min_overlap is the required common
 * support after max-lag trimming.
 */
inline LagEstimate estimate_lag_grid(const TimedStream<double>& reference,
                                       const TimedStream<double>& measured, double max_lag,
                                       double resolution, double min_overlap,
                                       double min_score = 0.8) {
  if (max_lag <= 0.0 || resolution <= 0.0 || resolution > max_lag) {
    raise("bad_argument", "estimate_lag: need 0 < resolution <= max_lag");
  }
  if (reference.empty() || measured.empty()) raise("empty_input", "estimate_lag: empty signal");
  const double w0 = std::max(reference.first_capture_time(), measured.first_capture_time());
  const double w1 = std::min(reference.last_capture_time(), measured.last_capture_time() - max_lag);
  if (w1 - w0 < min_overlap) {
    raise("insufficient_overlap", "estimate_lag: signals overlap for " + std::to_string(w1 - w0) +
                                      " s after max-lag trimming, need >= " +
                                      std::to_string(min_overlap) + " s");
  }
  const std::size_t n_lags = static_cast<std::size_t>(std::floor(max_lag / resolution)) + 1;
  std::vector<double> scores(n_lags);
  std::size_t best = 0;
  for (std::size_t k = 0; k < n_lags; ++k) {
    scores[k] = detail::normalized_correlation(reference, measured,
                                               static_cast<double>(k) * resolution, w0, w1);
    if (scores[k] > scores[best]) best = k;
  }
  LagEstimate out;
  out.lag = static_cast<double>(best) * resolution;
  out.score = scores[best];
  if (best > 0 && best + 1 < n_lags) {
    // Parabola through the peak and both neighbors; vertex offset in grid
    // steps, clamped to half a step.
    const double a = scores[best - 1], b = scores[best], c = scores[best + 1];
    const double denom = a - 2.0 * b + c;
    if (denom < 0.0) {
      const double delta = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
      out.lag += delta * resolution;
    }
  }
  if (out.score < min_score) {
    raise("low_confidence", "estimate_lag: peak correlation " + std::to_string(out.score) +
                                " below " + std::to_string(min_score));
  }
  return out;
}

/** End-to-end lag between a commanded probe and the measured response.
 *
 * A pure sine is ambiguous beyond half its period, so sine probes require
 * max_lag < period/2; prefer a chirp when the expected latency is large.
 * Raises low_confidence when the peak correlation is below 0.8.
 */
inline LagEstimate estimate_lag(const ProbeSignal& commanded, const TimedStream<double>& measured,
                                double max_lag, double resolution) {
  if (commanded.periodic() && max_lag >= 0.5 * commanded.base_period()) {
    raise("periodic_ambiguity",
          "estimate_lag: sine probe cannot disambiguate lags beyond half a period (" +
              std::to_string(0.5 * commanded.base_period()) + " s); use a chirp probe");
  }
  const double min_overlap = 3.0 * commanded.base_period();
  return estimate_lag_grid(commanded.stream, measured, max_lag, resolution, min_overlap);
}

/** l_action = l_e2e - l_obs. */
inline double exec_latency(double l_e2e, double l_obs) {
  if (l_e2e < l_obs) {
    raise("measurement_inconsistency",
          "exec_latency: end-to-end latency smaller than observation latency");
  }
  return l_e2e - l_obs;
}

/** Robot execution latency from desired-vs-measured EE trajectories.
 *
 * Each translation channel with actual motion is aligned independently; the
 * per-channel lags are fused by a correlation-weighted average. Rotation
 * channels do not participate. Channels disagreeing by more than twice the
 * grid resolution raise ambiguous_alignment.
 */
inline LagEstimate robot_exec_latency(const PoseTrajectory& desired, const PoseTrajectory& measured,
                                      double max_lag, double resolution) {
  desired.validate();
  measured.validate();
  std::vector<LagEstimate> valid;
  for (int axis = 0; axis < 3; ++axis) {
    TimedStream<double> cmd, meas;
    cmd.stream_id = "desired:axis" + std::to_string(axis);
    meas.stream_id = "measured:axis" + std::to_string(axis);
    double lo = 1e300, hi = -1e300;
    for (const auto& s : desired.samples) {
      const double v = s.pose.translation[axis];
      cmd.samples.push_back({s.t, v});
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    for (const auto& s : measured.samples) meas.samples.push_back({s.t, s.pose.translation[axis]});
    if (hi - lo < 1e-6) continue;  // no motion on this axis
    LagEstimate e;
    try {
      e = estimate_lag_grid(cmd, meas, max_lag, resolution, /*min_overlap=*/2.0 * max_lag);
    } catch (const Error& err) {
      if (err.code() == "low_confidence") continue;
      throw;
    }
    valid.push_back(e);
  }
  if (valid.empty()) {
    raise("low_confidence", "robot_exec_latency: no translation channel produced a confident lag");
  }
  for (std::size_t i = 0; i < valid.size(); ++i) {
    for (std::size_t j = i + 1; j < valid.size(); ++j) {
      if (std::abs(valid[i].lag - valid[j].lag) > 2.0 * resolution) {
        raise("ambiguous_alignment", "robot_exec_latency: translation channels disagree by " +
                                         std::to_string(std::abs(valid[i].lag - valid[j].lag)) +
                                         " s");
      }
    }
  }
  double weight_sum = 0.0, lag_sum = 0.0, score_max = 0.0;
  for (const LagEstimate& e : valid) {
    weight_sum += e.score;
    lag_sum += e.score * e.lag;
    score_max = std::max(score_max, e.score);
  }
  return {lag_sum / weight_sum, score_max};
}

}  // namespace umi
