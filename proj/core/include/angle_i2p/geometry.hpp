#pragma once

#include <span>
#include <vector>

#include "angle_i2p/types.hpp"

namespace angle_i2p {

/// Lifts a pixel with metric depth through the inverse pinhole model into
/// the camera frame. Throws DomainError for depth <= 0.
Point3 back_project(const Pixel& pixel, double depth, const CameraIntrinsics& intrinsics);

/// Forward pinhole projection of a camera-frame point. Throws DomainError when
/// the point is not strictly in front of the camera.
Pixel project(const Point3& point, const CameraIntrinsics& intrinsics);

struct CenteredCloud {
  Point3 centroid = Point3::Zero();
  std::vector<Point3> centered;
};

CenteredCloud centroid_and_center(std::span<const Point3> points);

enum class ConsistencyMode { kAngle, kDistance };

struct ConsistencyOptions {
  ConsistencyMode mode = ConsistencyMode::kAngle;
  /// Sensitivity of the angle score; δ lives in [0, 1].
  double sigma_d = 0.1;
  /// Sensitivity of the distance score, meters.
  double sigma_dist = 0.1;
  /// Compare signed cosines instead of their absolute values.
  bool signed_cosine = false;
};

/// Norm below which a centered vector carries no direction.
inline constexpr double kDegenerateNorm = 1e-9;

struct PairConsistency {
  double theta = 0.0;
  bool degenerate = false;
};

/// Angle consistency of one pair of centered correspondences. oi/oj are the
/// estimated-cloud vectors, pi/pj the point-cloud vectors. A near-zero vector
/// yields theta = 0 with the degenerate flag set.
PairConsistency angle_consistency_pair(const Point3& oi, const Point3& oj, const Point3& pi,
                                       const Point3& pj, double sigma_d,
                                       bool signed_cosine = false);

/// Both sides of a correspondence set centered on their own full-set centroid.
struct CenteredCorrespondences {
  CenteredCloud est;
  CenteredCloud points;
};

CenteredCorrespondences center_correspondences(const CorrespondenceSet& corrs);

struct ConsistencyMatrix {
  Matrix theta;  // K x K (or K x K' for cross matrices)
  std::size_t degenerate_pairs = 0;
};

/// Pairwise consistency over one index group. Centering always uses the full
/// set. Throws DomainError for groups smaller than 2 or invalid indices.
ConsistencyMatrix consistency_matrix(const CorrespondenceSet& corrs, std::span<const Index> group,
                                     const ConsistencyOptions& options = {});

/// Same as above with the centering precomputed once for many groups.
ConsistencyMatrix consistency_matrix(const CorrespondenceSet& corrs,
                                     const CenteredCorrespondences& centered,
                                     std::span<const Index> group,
                                     const ConsistencyOptions& options = {});

/// Rectangular consistency between two index groups (rows x cols); no
/// diagonal convention applies.
ConsistencyMatrix cross_consistency_matrix(const CorrespondenceSet& corrs,
                                           const CenteredCorrespondences& centered,
                                           std::span<const Index> rows,
                                           std::span<const Index> cols,
                                           const ConsistencyOptions& options = {});

/// Mean ratio of distance-to-centroid, estimated cloud over point cloud.
/// Terms whose point-cloud distance is below kDegenerateNorm are skipped.
double estimate_scale(std::span<const Point3> est_points, std::span<const Point3> points);
double estimate_scale(const CorrespondenceSet& corrs);

/// How the estimated scale is applied to the centered estimated cloud before
/// feature construction.
enum class ScaleRatioDirection {
  kReciprocal,  // multiply by 1 / s_est: lands in the point-cloud metric frame
  kLiteral,     // multiply by s_est
};

double rescale_factor(double s_est, ScaleRatioDirection direction);

struct NormalEstimate {
  std::vector<Point3> normals;
  std::vector<bool> degenerate;
};

inline constexpr int kDefaultNormalNeighbors = 16;

/// PCA normals over each point and its k nearest neighbours, oriented away
/// from the cloud centroid. Throws DomainError for k < 3 or fewer than k + 1
/// points.
NormalEstimate estimate_normals(std::span<const Point3> points, int k = kDefaultNormalNeighbors);

inline constexpr int kFeatureWidth = 24;

/// Builds the N x 24 initial feature rows
/// [c ; sin(c/2) ; cos(c/2) ; n_est ; n_pts] with c = (est_rescale * ô, p̂).
Matrix initial_features(const CorrespondenceSet& corrs, double est_rescale,
                        std::span<const Point3> normals_est,
                        std::span<const Point3> normals_points);

std::vector<Point3> est_points_of(const CorrespondenceSet& corrs);
std::vector<Point3> points_of(const CorrespondenceSet& corrs);

}  // namespace angle_i2p
