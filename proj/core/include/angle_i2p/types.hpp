#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace angle_i2p {

using Index = std::size_t;
using Point3 = Eigen::Vector3d;
using Matrix = Eigen::MatrixXd;

/// Raised when an operation's precondition is violated by its inputs.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double width = 0.0;
  double height = 0.0;

  bool is_valid() const;
  /// Throws DomainError when the invariants do not hold.
  void validate() const;
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Rigid transform mapping world (point-cloud) coordinates into the camera
/// frame: x_cam = rotation * x_world + translation.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }

  Point3 apply(const Point3& p) const { return rotation * p + translation; }
  Pose inverse() const;
  /// (*this) after `other`: x -> this(other(x)).
  Pose compose(const Pose& other) const;

  /// RᵀR = I and det(R) = +1 within `tolerance`.
  bool is_valid(double tolerance = 1e-9) const;
};

struct Correspondence {
  Pixel pixel;
  Point3 point = Point3::Zero();      // point-cloud side
  double est_depth = 1.0;             // estimated depth of the pixel
  Point3 est_point = Point3::Zero();  // back_project(pixel, est_depth)
};

struct CorrespondenceSet {
  std::vector<Correspondence> items;
  CameraIntrinsics intrinsics;
  std::optional<Pose> gt_pose;
  std::optional<std::vector<bool>> gt_labels;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }

  /// Checks label length and the est_point/est_depth relation.
  void validate() const;
};

/// Builds a correspondence whose est_point is the exact back-projection.
Correspondence make_correspondence(const Pixel& pixel, const Point3& point,
                                   double est_depth,
                                   const CameraIntrinsics& intrinsics);

}  // namespace angle_i2p
