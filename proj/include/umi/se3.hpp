#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "umi/error.hpp"

namespace umi {

/** Rigid transform: translation in meters plus a unit quaternion.
 *
 * Poses are frame-to-world transforms; "pose of b relative to a" is
 * inverse(a) * b. Quaternions are kept normalized and sign-canonical
 * (w >= 0) after every operation so equality tests are deterministic.
 */
struct Pose {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();

  Pose() = default;
  Pose(const Eigen::Vector3d& t, const Eigen::Quaterniond& q)
      : translation(t), rotation(q) {
    canonicalize();
  }

  static Pose identity() { return Pose(); }

  static Pose from_translation(double x, double y, double z) {
    return Pose(Eigen::Vector3d(x, y, z), Eigen::Quaterniond::Identity());
  }

  static Pose from_axis_angle(const Eigen::Vector3d& axis, double angle_rad,
                              const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
    return Pose(t, Eigen::Quaterniond(Eigen::AngleAxisd(angle_rad, axis.normalized())));
  }

  // Homogeneous 4x4 matrix, mostly useful for diagnostics; tests keep an
  // independent matrix route of their own.
  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation.toRotationMatrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  void canonicalize() {
    // Renormalize only when measurably off unit length; keeps serialized
    // round trips bit-exact while bounding drift over long compose chains.
    if (std::abs(rotation.squaredNorm() - 1.0) > 1e-13) rotation.normalize();
    // Sign convention: first nonzero of (w,x,y,z) positive. Keeps q and -q
    // from comparing unequal.
    const double* c[4] = {&rotation.w(), &rotation.x(), &rotation.y(), &rotation.z()};
    for (const double* v : c) {
      if (*v > 0.0) break;
      if (*v < 0.0) {
        rotation.coeffs() = -rotation.coeffs();
        break;
      }
    }
  }
};

// apply b then a, i.e. T_a * T_b under the homogeneous-matrix convention.
inline Pose compose(const Pose& a, const Pose& b) {
  return Pose(a.translation + a.rotation * b.translation, a.rotation * b.rotation);
}

inline Pose inverse(const Pose& a) {
  const Eigen::Quaterniond q_inv = a.rotation.conjugate();
  return Pose(-(q_inv * a.translation), q_inv);
}

// Geodesic rotation distance 2*acos(|<q1,q2>|), in radians. Good for
// reporting angular errors; its acos is too ill-conditioned near zero for
// tight equality tests -- use quaternion_distance for those.
inline double geodesic_angle(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  const double d = std::min(1.0, std::abs(a.dot(b)));
  return 2.0 * std::acos(d);
}

inline double geodesic_angle(const Pose& a, const Pose& b) {
  return geodesic_angle(a.rotation, b.rotation);
}

// Sign-insensitive chord distance min(|q1-q2|, |q1+q2|); ~theta/2 for small
// rotation offsets theta and exact down to machine precision.
inline double quaternion_distance(const Eigen::Quaterniond& a, const Eigen::Quaterniond& b) {
  return std::min((a.coeffs() - b.coeffs()).norm(), (a.coeffs() + b.coeffs()).norm());
}

inline bool approx_equal(const Pose& a, const Pose& b, double tol = 1e-9) {
  return (a.translation - b.translation).norm() <= tol &&
         quaternion_distance(a.rotation, b.rotation) <= tol;
}

/** Translation lerp + shortest-arc slerp. alpha must be in [0, 1]. */
inline Pose interpolate_pose(const Pose& a, const Pose& b, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    raise("bad_argument", "interpolate_pose: alpha outside [0,1]");
  }
  // Eigen's slerp already takes the shorter arc (flips sign when dot < 0).
  return Pose(a.translation + alpha * (b.translation - a.translation),
              a.rotation.slerp(alpha, b.rotation));
}

struct TimedPose {
  double t = 0.0;  // seconds
  Pose pose;
};

/** Time-ordered pose samples in a named coordinate frame. */
struct PoseTrajectory {
  std::vector<TimedPose> samples;
  std::string frame_id;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  void validate() const {
    for (std::size_t i = 1; i < samples.size(); ++i) {
      if (!(samples[i].t > samples[i - 1].t)) {
        raise("bad_argument", "trajectory timestamps must be strictly increasing");
      }
    }
  }
};

enum class ActionRepr { RelativeTrajectory, Delta, Absolute };

inline const char* to_string(ActionRepr r) {
  switch (r) {
    case ActionRepr::RelativeTrajectory: return "relative_trajectory";
    case ActionRepr::Delta: return "delta";
    case ActionRepr::Absolute: return "absolute";
  }
  return "unknown";
}

inline ActionRepr action_repr_from_string(const std::string& s) {
  if (s == "relative_trajectory") return ActionRepr::RelativeTrajectory;
  if (s == "delta") return ActionRepr::Delta;
  if (s == "absolute") return ActionRepr::Absolute;
  raise("bad_argument", "unknown action representation: " + s);
}

/** Re-express every pose relative to samples[base_index].
 *
 * Element k becomes inverse(pose[base]) * pose[k]; the base element is the
 * identity. The output frame is labeled "relative:<base timestamp>".
 */
inline PoseTrajectory relative_trajectory(const PoseTrajectory& traj, std::size_t base_index) {
  if (traj.empty()) raise("empty_input", "relative_trajectory: empty trajectory");
  if (base_index >= traj.size()) {
    raise("out_of_range", "relative_trajectory: base_index out of range");
  }
  const Pose base_inv = inverse(traj.samples[base_index].pose);
  PoseTrajectory out;
  out.frame_id = "relative:" + std::to_string(traj.samples[base_index].t);
  out.samples.reserve(traj.size());
  for (const TimedPose& s : traj.samples) {
    out.samples.push_back({s.t, compose(base_inv, s.pose)});
  }
  return out;
}

// Step k = inverse(pose[k]) * pose[k+1]; output has length n-1.
inline std::vector<Pose> to_delta(const PoseTrajectory& traj) {
  if (traj.size() < 2) raise("bad_argument", "to_delta: need at least 2 samples");
  std::vector<Pose> deltas;
  deltas.reserve(traj.size() - 1);
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    deltas.push_back(compose(inverse(traj.samples[k].pose), traj.samples[k + 1].pose));
  }
  return deltas;
}

// Left fold of deltas onto base: out[0] = base, out[k+1] = out[k] * delta[k].
inline std::vector<Pose> accumulate_deltas(const std::vector<Pose>& deltas, const Pose& base) {
  std::vector<Pose> out;
  out.reserve(deltas.size() + 1);
  out.push_back(base);
  for (const Pose& d : deltas) {
    out.push_back(compose(out.back(), d));
  }
  return out;
}

/** Proprioception history relative to the current (last) pose.
 *
 * With a 2-step window the first element encodes the most recent motion,
 * which is what gives the consumer velocity information; the last element
 * is always the identity.
 */
inline PoseTrajectory relative_proprioception(const PoseTrajectory& history) {
  if (history.empty()) raise("empty_input", "relative_proprioception: empty history");
  return relative_trajectory(history, history.size() - 1);
}

// Pose of the right gripper in the left gripper's frame. Both inputs must
// live in the same (map) frame; callers holding streams enforce that.
inline Pose inter_gripper_pose(const Pose& left, const Pose& right) {
  return compose(inverse(left), right);
}

inline std::vector<Pose> relative_to_absolute(const std::vector<Pose>& relative, const Pose& anchor) {
  std::vector<Pose> out;
  out.reserve(relative.size());
  for (const Pose& r : relative) out.push_back(compose(anchor, r));
  return out;
}

// Transport a whole trajectory by a global transform G (left-compose).
inline PoseTrajectory apply_transform(const Pose& g, const PoseTrajectory& traj) {
  PoseTrajectory out = traj;
  for (TimedPose& s : out.samples) s.pose = compose(g, s.pose);
  return out;
}

}  // namespace umi
