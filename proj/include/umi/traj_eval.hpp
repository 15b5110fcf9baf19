#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "umi/error.hpp"
#include "umi/se3.hpp"

namespace umi {

// Nearest-timestamp gate for associating two trajectories, seconds.
inline constexpr double kAssociationGate = 0.010;

struct AssociatedPair {
  std::size_t est_index = 0;
  std::size_t gt_index = 0;
};

/** Nearest-timestamp association within the gate; each ground-truth sample
 * is used at most once (the closest estimate wins). */
inline std::vector<AssociatedPair> associate(const PoseTrajectory& est, const PoseTrajectory& gt,
                                             double gate = kAssociationGate) {
  est.validate();
  gt.validate();
  std::vector<AssociatedPair> pairs;
  if (est.empty() || gt.empty()) return pairs;
  std::size_t j = 0;
  std::vector<double> best_dt(gt.size(), 1e300);
  std::vector<std::size_t> best_est(gt.size(), 0);
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est.samples[i].t;
    while (j + 1 < gt.size() && gt.samples[j + 1].t <= t) ++j;
    std::size_t cand = j;
    if (j + 1 < gt.size() &&
        std::abs(gt.samples[j + 1].t - t) < std::abs(gt.samples[j].t - t)) {
      cand = j + 1;
    }
    const double dt = std::abs(gt.samples[cand].t - t);
    if (dt <= gate && dt < best_dt[cand]) {
      best_dt[cand] = dt;
      best_est[cand] = i;
    }
  }
  for (std::size_t g = 0; g < gt.size(); ++g) {
    if (best_dt[g] <= gate) pairs.push_back({best_est[g], g});
  }
  return pairs;
}

struct AlignmentResult {
  Pose transform;             // maps estimated frame into the ground-truth frame
  double residual_rmse = 0.0; // meters, after alignment
  double scale = 1.0;         // 1 unless with_scale was requested
};

/** Closed-form least-squares rigid alignment (no scale by default).
 *
 * Metric scale is observable in this pipeline, so the standard fit excludes
 * it; `with_scale` enables the similarity variant for diagnostics.
 * Degenerate (coincident or collinear) point sets are rejected because the
 * rotation is not determined by them.
 */
inline AlignmentResult rigid_align(const PoseTrajectory& est, const PoseTrajectory& gt,
                                   bool with_scale = false, double gate = kAssociationGate) {
  const auto pairs = associate(est, gt, gate);
  if (pairs.empty()) raise("association_failure", "rigid_align: no associated samples");
  const std::size_t n = pairs.size();
  if (n < 3) raise("degenerate_geometry", "rigid_align: need at least 3 associated points");

  Eigen::Vector3d mean_est = Eigen::Vector3d::Zero();
  Eigen::Vector3d mean_gt = Eigen::Vector3d::Zero();
  for (const auto& pr : pairs) {
    mean_est += est.samples[pr.est_index].pose.translation;
    mean_gt += gt.samples[pr.gt_index].pose.translation;
  }
  mean_est /= static_cast<double>(n);
  mean_gt /= static_cast<double>(n);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double var_est = 0.0;
  for (const auto& pr : pairs) {
    const Eigen::Vector3d de = est.samples[pr.est_index].pose.translation - mean_est;
    const Eigen::Vector3d dg = gt.samples[pr.gt_index].pose.translation - mean_gt;
    cov += dg * de.transpose();
    var_est += de.squaredNorm();
  }
  cov /= static_cast<double>(n);
  var_est /= static_cast<double>(n);

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d d = svd.singularValues();
  if (d(0) <= 1e-15 || var_est <= 1e-18) {
    raise("degenerate_geometry", "rigid_align: coincident point sets");
  }
  if (d(1) <= 1e-9 * d(0)) {
    raise("degenerate_geometry", "rigid_align: collinear point sets, rotation undetermined");
  }
  Eigen::Matrix3d sign = Eigen::Matrix3d::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) sign(2, 2) = -1.0;
  const Eigen::Matrix3d rot = svd.matrixU() * sign * svd.matrixV().transpose();

  AlignmentResult out;
  out.scale = with_scale ? (d.dot(sign.diagonal()) / var_est) : 1.0;
  out.transform = Pose(mean_gt - out.scale * (rot * mean_est), Eigen::Quaterniond(rot));

  double sq = 0.0;
  for (const auto& pr : pairs) {
    const Eigen::Vector3d mapped =
        out.scale * (rot * est.samples[pr.est_index].pose.translation) +
        out.transform.translation;
    sq += (mapped - gt.samples[pr.gt_index].pose.translation).squaredNorm();
  }
  out.residual_rmse = std::sqrt(sq / static_cast<double>(n));
  return out;
}

inline PoseTrajectory apply_alignment(const AlignmentResult& alignment, const PoseTrajectory& est) {
  PoseTrajectory out = est;
  for (auto& s : out.samples) {
    s.pose = Pose(alignment.scale * (alignment.transform.rotation * s.pose.translation) +
                      alignment.transform.translation,
                  alignment.transform.rotation * s.pose.rotation);
  }
  return out;
}

struct AteReport {
  double pos_mean = 0.0;  // meters
  double pos_rmse = 0.0;  // meters
  double rot_mean = 0.0;  // degrees
  double rot_rmse = 0.0;  // degrees
  std::vector<double> pos_residuals;
  std::vector<double> rot_residuals;
};

/** Absolute trajectory error on associated samples, comparing est as given.
 *
 * Callers wanting the usual aligned metric run rigid_align + apply_alignment
 * first (or use ate_aligned).
 */
inline AteReport ate(const PoseTrajectory& est, const PoseTrajectory& gt,
                     double gate = kAssociationGate) {
  const auto pairs = associate(est, gt, gate);
  if (pairs.empty()) raise("association_failure", "ate: no associated samples");
  AteReport report;
  double pos_sq = 0.0, rot_sq = 0.0, pos_sum = 0.0, rot_sum = 0.0;
  for (const auto& pr : pairs) {
    const Pose& pe = est.samples[pr.est_index].pose;
    const Pose& pg = gt.samples[pr.gt_index].pose;
    const double pos = (pe.translation - pg.translation).norm();
    const double rot = geodesic_angle(pe, pg) * 180.0 / M_PI;
    report.pos_residuals.push_back(pos);
    report.rot_residuals.push_back(rot);
    pos_sum += pos;
    rot_sum += rot;
    pos_sq += pos * pos;
    rot_sq += rot * rot;
  }
  const double n = static_cast<double>(pairs.size());
  report.pos_mean = pos_sum / n;
  report.pos_rmse = std::sqrt(pos_sq / n);
  report.rot_mean = rot_sum / n;
  report.rot_rmse = std::sqrt(rot_sq / n);
  return report;
}

struct AlignedAte {
  AlignmentResult alignment;
  AteReport report;
};

inline AlignedAte ate_aligned(const PoseTrajectory& est, const PoseTrajectory& gt,
                              bool with_scale = false, double gate = kAssociationGate) {
  AlignedAte out;
  out.alignment = rigid_align(est, gt, with_scale, gate);
  out.report = ate(apply_alignment(out.alignment, est), gt, gate);
  return out;
}

struct RpeReport {
  double pos_mean = 0.0;  // meters
  double rot_mean = 0.0;  // degrees
  std::size_t count = 0;
  std::vector<double> pos_residuals;
  std::vector<double> rot_residuals;
};

/** Error of the estimated inter-gripper pose against ground truth.
 *
 * Evaluated at left-estimate timestamps; every trajectory must supply a
 * sample within the association gate. Invariant to a common transform of
 * both estimated trajectories, so no alignment is run first.
 */
inline RpeReport inter_gripper_rpe(const PoseTrajectory& left_est, const PoseTrajectory& right_est,
                                   const PoseTrajectory& left_gt, const PoseTrajectory& right_gt,
                                   double gate = kAssociationGate) {
  for (const PoseTrajectory* t : {&left_est, &right_est, &left_gt, &right_gt}) t->validate();

  const auto nearest_within = [gate](const PoseTrajectory& traj, double t, Pose* out) {
    if (traj.empty()) return false;
    std::size_t lo = 0, hi = traj.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (traj.samples[mid].t < t) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    if (lo > 0 && std::abs(traj.samples[lo - 1].t - t) < std::abs(traj.samples[lo].t - t)) --lo;
    if (std::abs(traj.samples[lo].t - t) > gate) return false;
    *out = traj.samples[lo].pose;
    return true;
  };

  RpeReport report;
  double pos_sum = 0.0, rot_sum = 0.0;
  for (const auto& ls : left_est.samples) {
    Pose re, lg, rg;
    if (!nearest_within(right_est, ls.t, &re) || !nearest_within(left_gt, ls.t, &lg) ||
        !nearest_within(right_gt, ls.t, &rg)) {
      continue;
    }
    const Pose rel_est = inter_gripper_pose(ls.pose, re);
    const Pose rel_gt = inter_gripper_pose(lg, rg);
    const double pos = (rel_est.translation - rel_gt.translation).norm();
    const double rot = geodesic_angle(rel_est, rel_gt) * 180.0 / M_PI;
    report.pos_residuals.push_back(pos);
    report.rot_residuals.push_back(rot);
    pos_sum += pos;
    rot_sum += rot;
  }
  report.count = report.pos_residuals.size();
  if (report.count == 0) raise("association_failure", "inter_gripper_rpe: no common timestamps");
  report.pos_mean = pos_sum / static_cast<double>(report.count);
  report.rot_mean = rot_sum / static_cast<double>(report.count);
  return report;
}

}  // namespace umi
