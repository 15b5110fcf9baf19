#pragma once

// Shared generators and independent oracles for the test suite. Oracles in
// here must not call the production routine they are used to check.

#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "umi/se3.hpp"

namespace umi::testing {

inline std::mt19937& rng(unsigned seed = 0) {
  thread_local std::mt19937 gen(seed);
  if (seed != 0) gen.seed(seed);
  return gen;
}

inline Eigen::Quaterniond random_unit_quaternion(std::mt19937& gen) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(gen), n(gen), n(gen), n(gen));
  q.normalize();
  return q;
}

inline Pose random_pose(std::mt19937& gen, double translation_scale = 1.0) {
  std::uniform_real_distribution<double> u(-translation_scale, translation_scale);
  return Pose(Eigen::Vector3d(u(gen), u(gen), u(gen)), random_unit_quaternion(gen));
}

inline PoseTrajectory random_trajectory(std::mt19937& gen, std::size_t n,
                                        double dt = 0.1, double t0 = 0.0) {
  PoseTrajectory traj;
  traj.frame_id = "map";
  traj.samples.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    traj.samples.push_back({t0 + static_cast<double>(k) * dt, random_pose(gen)});
  }
  return traj;
}

// ---- 4x4 homogeneous-matrix oracle -----------------------------------------
// Independent algebraic route: rotation matrices and matrix products instead
// of quaternion composition.

inline Eigen::Matrix4d mat4_of(const Pose& p) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = p.rotation.toRotationMatrix();
  m.topRightCorner<3, 1>() = p.translation;
  return m;
}

inline Eigen::Matrix4d mat4_compose(const Pose& a, const Pose& b) {
  return mat4_of(a) * mat4_of(b);
}

inline Eigen::Matrix4d mat4_inverse(const Pose& a) {
  return mat4_of(a).inverse();
}

inline double mat4_distance(const Eigen::Matrix4d& m, const Pose& p) {
  return (m - mat4_of(p)).cwiseAbs().maxCoeff();
}

// Single-axis slerp oracle: interpolating two rotations about the same axis
// is a rotation about that axis by the lerped angle.
inline Eigen::Quaterniond axis_angle_slerp(const Eigen::Vector3d& axis, double angle_a,
                                           double angle_b, double alpha) {
  const double angle = angle_a + alpha * (angle_b - angle_a);
  return Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized()));
}

}  // namespace umi::testing
