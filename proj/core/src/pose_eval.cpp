#include "angle_i2p/pose_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "angle_i2p/correspondence_io.hpp"
#include "angle_i2p/geometry.hpp"

namespace angle_i2p {

std::vector<double> correspondence_errors(const CorrespondenceSet& corrs, const Pose& gt_pose) {
  std::vector<double> errors;
  errors.reserve(corrs.size());
  for (const auto& c : corrs.items) {
    const Point3 cam = gt_pose.apply(c.point);
    if (!(cam.z() > 0.0)) {
      errors.push_back(std::numeric_limits<double>::infinity());
      continue;
    }
    errors.push_back((back_project(c.pixel, cam.z(), corrs.intrinsics) - cam).norm());
  }
  return errors;
}

std::vector<bool> label_inliers(const CorrespondenceSet& corrs, const Pose& gt_pose,
                                double threshold) {
  const auto errors = correspondence_errors(corrs, gt_pose);
  std::vector<bool> labels(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) labels[i] = errors[i] < threshold;
  return labels;
}

std::vector<bool> label_inliers(const CorrespondenceSet& corrs, double threshold) {
  if (!corrs.gt_pose) throw DomainError("label_inliers: correspondence set has no ground-truth pose");
  return label_inliers(corrs, *corrs.gt_pose, threshold);
}

double rotation_error(const Eigen::Matrix3d& r_est, const Eigen::Matrix3d& r_gt) {
  // arccos((tr - 1) / 2) written as atan2(sin, cos): same angle, but the sine
  // term keeps full precision for nearly identical rotations.
  const Eigen::Matrix3d rel = r_est.transpose() * r_gt;
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Eigen::Vector3d axis(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * axis.norm(), c) * 180.0 / std::numbers::pi;
}

double translation_error(const Eigen::Vector3d& t_est, const Eigen::Vector3d& t_gt) {
  return (t_est - t_gt).norm();
}

SceneMetrics evaluate_scene(const CorrespondenceSet& corrs, const Pose& gt_pose,
                            const EvalThresholds& thresholds,
                            std::span<const Point3> reference_points) {
  SceneMetrics m;
  m.num_correspondences = corrs.size();
  if (!corrs.empty()) {
    const auto labels = label_inliers(corrs, gt_pose, thresholds.inlier_threshold);
    m.inlier_ratio = static_cast<double>(std::count(labels.begin(), labels.end(), true)) /
                     static_cast<double>(labels.size());
  }
  const auto pnp = solve_pnp_ransac(corrs, thresholds.ransac);
  m.pnp_success = pnp.success;
  if (!pnp.success) {
    m.rotation_error_deg = std::numeric_limits<double>::quiet_NaN();
    m.translation_error_m = std::numeric_limits<double>::quiet_NaN();
    m.median_reprojection_distance = std::numeric_limits<double>::infinity();
    return m;
  }
  m.rotation_error_deg = rotation_error(pnp.pose.rotation, gt_pose.rotation);
  m.translation_error_m = translation_error(pnp.pose.translation, gt_pose.translation);

  std::vector<Point3> own;
  if (reference_points.empty()) {
    own = points_of(corrs);
    reference_points = own;
  }
  std::vector<double> dist;
  dist.reserve(reference_points.size());
  for (const auto& p : reference_points) dist.push_back((pnp.pose.apply(p) - gt_pose.apply(p)).norm());
  std::size_t passing = 0;
  for (double d : dist)
    if (d < thresholds.registration_threshold) ++passing;
  m.point_pass_ratio = static_cast<double>(passing) / static_cast<double>(dist.size());
  std::sort(dist.begin(), dist.end());
  const std::size_t mid = dist.size() / 2;
  m.median_reprojection_distance =
      dist.size() % 2 ? dist[mid] : 0.5 * (dist[mid - 1] + dist[mid]);
  m.rr_pass = m.median_reprojection_distance < thresholds.registration_threshold;
  return m;
}

MetricsReport aggregate(std::span<const SceneMetrics> scenes, const EvalThresholds& thresholds) {
  MetricsReport r;
  r.thresholds = thresholds;
  r.scenes = scenes.size();
  if (scenes.empty()) return r;
  std::size_t ok = 0;
  std::size_t pass = 0;
  for (const auto& s : scenes) {
    r.inlier_ratio += s.inlier_ratio;
    if (s.rr_pass) ++pass;
    if (s.pnp_success) {
      ++ok;
      r.mean_rotation_error += s.rotation_error_deg;
      r.mean_translation_error += s.translation_error_m;
    }
  }
  r.inlier_ratio /= static_cast<double>(scenes.size());
  r.registration_recall = static_cast<double>(pass) / static_cast<double>(scenes.size());
  r.pnp_failures = scenes.size() - ok;
  if (ok > 0) {
    r.mean_rotation_error /= static_cast<double>(ok);
    r.mean_translation_error /= static_cast<double>(ok);
  } else {
    r.mean_rotation_error = std::numeric_limits<double>::quiet_NaN();
    r.mean_translation_error = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

namespace {
std::string real_or_nan(double v) { return std::isfinite(v) ? format_real(v) : std::string("nan"); }
}  // namespace

void write_metrics_csv(std::ostream& out, std::span<const SceneMetrics> scenes) {
  out << "scene,ir,mre_deg,mte_m,rr_pass\n";
  for (const auto& s : scenes) {
    out << s.name << ',' << format_real(s.inlier_ratio) << ',' << real_or_nan(s.rotation_error_deg)
        << ',' << real_or_nan(s.translation_error_m) << ',' << (s.rr_pass ? 1 : 0) << '\n';
  }
}

void write_summary(std::ostream& out, const MetricsReport& r) {
  out << "{\n"
      << "  \"scenes\": " << r.scenes << ",\n"
      << "  \"ir\": " << real_or_nan(r.inlier_ratio) << ",\n"
      << "  \"mre_deg\": " << real_or_nan(r.mean_rotation_error) << ",\n"
      << "  \"mte_m\": " << real_or_nan(r.mean_translation_error) << ",\n"
      << "  \"rr\": " << real_or_nan(r.registration_recall) << ",\n"
      << "  \"pnp_failures\": " << r.pnp_failures << ",\n"
      << "  \"ir_threshold_m\": " << format_real(r.thresholds.inlier_threshold) << ",\n"
      << "  \"rr_threshold_m\": " << format_real(r.thresholds.registration_threshold) << ",\n"
      << "  \"ransac_iterations\": " << r.thresholds.ransac.iterations << ",\n"
      << "  \"reprojection_threshold_px\": "
      << format_real(r.thresholds.ransac.reprojection_threshold_px) << "\n"
      << "}\n";
}

}  // namespace angle_i2p
