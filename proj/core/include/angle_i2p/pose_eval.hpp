#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "angle_i2p/pnp.hpp"
#include "angle_i2p/types.hpp"

namespace angle_i2p {

/// 3D discrepancy of each correspondence under the ground-truth pose: the
/// point is moved into the camera frame and compared with the pixel's ray
/// lifted to the same depth. Points at or behind the camera get +inf.
std::vector<double> correspondence_errors(const CorrespondenceSet& corrs, const Pose& gt_pose);

/// error < threshold (meters). Throws DomainError when no pose is available.
std::vector<bool> label_inliers(const CorrespondenceSet& corrs, const Pose& gt_pose,
                                double threshold = 0.05);
std::vector<bool> label_inliers(const CorrespondenceSet& corrs, double threshold = 0.05);

/// Geodesic angle between two rotations, degrees.
double rotation_error(const Eigen::Matrix3d& r_est, const Eigen::Matrix3d& r_gt);
/// Euclidean distance between translations, meters.
double translation_error(const Eigen::Vector3d& t_est, const Eigen::Vector3d& t_gt);

struct EvalThresholds {
  double inlier_threshold = 0.05;        // IR, meters
  double registration_threshold = 0.1;   // RR, meters
  RansacOptions ransac;
};

/// One scene's numbers.
struct SceneMetrics {
  std::string name;
  std::size_t num_correspondences = 0;
  double inlier_ratio = 0.0;
  bool pnp_success = false;
  double rotation_error_deg = 0.0;
  double translation_error_m = 0.0;
  double median_reprojection_distance = 0.0;  // meters, +inf on PnP failure
  double point_pass_ratio = 0.0;              // fraction of points under the RR threshold
  bool rr_pass = false;
};

/// Aggregate over scenes. Rotation/translation means cover successful
/// registrations only; failures are counted separately.
struct MetricsReport {
  double inlier_ratio = 0.0;
  double mean_rotation_error = 0.0;
  double mean_translation_error = 0.0;
  double registration_recall = 0.0;
  std::size_t scenes = 0;
  std::size_t pnp_failures = 0;
  EvalThresholds thresholds;
};

/// Evaluates one (possibly filtered) correspondence set against its ground
/// truth. The registration criterion is the median distance between
/// reference points mapped by the estimated and the ground-truth pose;
/// reference_points defaults to the set's own points.
SceneMetrics evaluate_scene(const CorrespondenceSet& corrs, const Pose& gt_pose,
                            const EvalThresholds& thresholds = {},
                            std::span<const Point3> reference_points = {});

MetricsReport aggregate(std::span<const SceneMetrics> scenes, const EvalThresholds& thresholds);

/// `scene,ir,mre_deg,mte_m,rr_pass`
void write_metrics_csv(std::ostream& out, std::span<const SceneMetrics> scenes);
/// Brace-delimited key/value block with stable field names.
void write_summary(std::ostream& out, const MetricsReport& report);

}  // namespace angle_i2p
