#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "angle_i2p/geometry.hpp"
#include "angle_i2p/synth.hpp"
#include "angle_i2p/types.hpp"

namespace angle_i2p::test {

inline std::vector<Index> iota(std::size_t n) {
  std::vector<Index> out(n);
  std::iota(out.begin(), out.end(), Index{0});
  return out;
}

inline std::vector<Point3> random_points(std::size_t n, std::mt19937_64& rng, double lo = -1.0,
                                         double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Point3> out(n);
  for (auto& p : out) p = Point3(u(rng), u(rng), u(rng));
  return out;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return q.normalized().toRotationMatrix();
}

inline Pose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Pose p;
  p.rotation = random_rotation(rng);
  p.translation = Eigen::Vector3d(u(rng), u(rng), u(rng));
  return p;
}

/// Exact correspondences for world points seen from `pose`: camera-frame
/// points in a box in front of the camera are mapped back to the world.
inline CorrespondenceSet exact_set(std::size_t n, const Pose& pose, std::mt19937_64& rng,
                                   double depth_scale = 1.0, double depth_bias = 0.0) {
  const auto intrinsics = default_intrinsics();
  std::uniform_real_distribution<double> uu(20.0, intrinsics.width - 20.0);
  std::uniform_real_distribution<double> uv(20.0, intrinsics.height - 20.0);
  std::uniform_real_distribution<double> ud(1.5, 6.0);
  const Pose inv = pose.inverse();
  CorrespondenceSet set;
  set.intrinsics = intrinsics;
  set.gt_pose = pose;
  for (std::size_t i = 0; i < n; ++i) {
    const Pixel px{uu(rng), uv(rng)};
    const double depth = ud(rng);
    const Point3 cam = back_project(px, depth, intrinsics);
    set.items.push_back(
        make_correspondence(px, inv.apply(cam), depth_scale * depth + depth_bias, intrinsics));
  }
  set.gt_labels = std::vector<bool>(n, true);
  return set;
}

}  // namespace angle_i2p::test
