#include "angle_i2p/types.hpp"

#include <cmath>

#include <Eigen/LU>

#include "angle_i2p/geometry.hpp"

namespace angle_i2p {

bool CameraIntrinsics::is_valid() const {
  return std::isfinite(fx) && std::isfinite(fy) && fx > 0.0 && fy > 0.0 &&
         cx > 0.0 && cx < width && cy > 0.0 && cy < height;
}

void CameraIntrinsics::validate() const {
  if (!is_valid()) {
    throw DomainError("invalid camera intrinsics: need fx, fy > 0, 0 < cx < width, 0 < cy < height");
  }
}

Pose Pose::inverse() const {
  Pose inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

Pose Pose::compose(const Pose& other) const {
  Pose out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

bool Pose::is_valid(double tolerance) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tolerance && std::abs(rotation.determinant() - 1.0) <= tolerance;
}

void CorrespondenceSet::validate() const {
  if (gt_labels && gt_labels->size() != items.size()) {
    throw DomainError("gt_labels length " + std::to_string(gt_labels->size()) +
                      " does not match correspondence count " + std::to_string(items.size()));
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!(items[i].est_depth > 0.0)) {
      throw DomainError("correspondence " + std::to_string(i) + " has non-positive est_depth");
    }
  }
}

Correspondence make_correspondence(const Pixel& pixel, const Point3& point, double est_depth,
                                   const CameraIntrinsics& intrinsics) {
  Correspondence c;
  c.pixel = pixel;
  c.point = point;
  c.est_depth = est_depth;
  c.est_point = back_project(pixel, est_depth, intrinsics);
  return c;
}

}  // namespace angle_i2p
