#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "angle_i2p/types.hpp"

namespace angle_i2p {

/// Smallest sample the linear solver accepts.
inline constexpr std::size_t kPnpMinimalSet = 6;

/// Normalized direct linear transform for the 3x4 projection followed by
/// SVD orthonormalization of its rotation block. Returns nullopt for
/// degenerate configurations or fewer than 6 correspondences.
std::optional<Pose> solve_pnp_dlt(std::span<const Pixel> pixels, std::span<const Point3> points,
                                  const CameraIntrinsics& intrinsics);

/// Pose from points lying on (or near) one plane: homography in the plane's
/// own 2-D frame, decomposed into rotation and translation. Needs 6 points.
std::optional<Pose> solve_pnp_planar(std::span<const Pixel> pixels, std::span<const Point3> points,
                                     const CameraIntrinsics& intrinsics);

/// Runs both linear solvers and keeps the pose with the lower summed
/// reprojection error on the input. The general DLT is singular on planar
/// structure (a single wall), the planar solver is biased off-plane.
std::optional<Pose> solve_pnp_linear(std::span<const Pixel> pixels, std::span<const Point3> points,
                                     const CameraIntrinsics& intrinsics);

/// Levenberg-Marquardt on summed squared pixel reprojection error. Returns the
/// input unchanged if no step improves it.
Pose refine_pose(const Pose& initial, std::span<const Pixel> pixels, std::span<const Point3> points,
                 const CameraIntrinsics& intrinsics, int iterations = 100);

/// Minimal three-point solutions (up to four). Bearing triangles are solved
/// through Grunert's quartic, each root polished by Newton steps on the law
/// of cosines, and the camera-frame triangle aligned to the world triangle.
std::vector<Pose> solve_p3p(std::span<const Pixel> pixels, std::span<const Point3> points,
                            const CameraIntrinsics& intrinsics);

/// Pixel distance between `pixel` and the projection of `point` under `pose`;
/// +inf when the point is not in front of the camera.
double reprojection_error(const Pose& pose, const Point3& point, const Pixel& pixel,
                          const CameraIntrinsics& intrinsics);

enum class HypothesisSolver {
  kDlt6,  // six-point linear solve per sample
  kP3P,   // three-point minimal solve per sample, every root scored
};

struct RansacOptions {
  int iterations = 1000;
  double reprojection_threshold_px = 3.0;
  std::uint64_t seed = 0;
  HypothesisSolver solver = HypothesisSolver::kDlt6;
  /// Polish hypotheses and consensus refits with refine_pose.
  bool refine = true;
};

struct PnpResult {
  bool success = false;
  Pose pose;
  std::vector<bool> inlier_mask;
  std::size_t num_inliers = 0;
};

/// Hypothesize-and-verify over minimal samples (6 points for the DLT, 3 for
/// P3P). The best hypothesis has the
/// most reprojection inliers (ties: lower summed error); the final pose is
/// the linear solve on its consensus set (optionally refined), repeated while
/// the consensus grows, up to three rounds. Fails with fewer than 6
/// correspondences or when no hypothesis gathers 6 inliers.
PnpResult solve_pnp_ransac(const CorrespondenceSet& corrs, const RansacOptions& options = {});

}  // namespace angle_i2p
