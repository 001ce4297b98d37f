#include "angle_i2p/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

namespace angle_i2p {
namespace {

// Explicit component order so every caller (and the scalar references)
// rounds identically.
inline double dot3(const Point3& a, const Point3& b) {
  return a.x() * b.x() + a.y() * b.y() + a.z() * b.z();
}

inline double norm3(const Point3& a) { return std::sqrt(dot3(a, a)); }

void check_group(std::span<const Index> group, std::size_t n, std::size_t min_size) {
  if (group.size() < min_size) {
    throw DomainError("consistency group needs at least " + std::to_string(min_size) +
                      " members, got " + std::to_string(group.size()));
  }
  for (Index idx : group) {
    if (idx >= n) {
      throw DomainError("consistency group index " + std::to_string(idx) + " out of range " +
                        std::to_string(n));
    }
  }
}

PairConsistency pair_score(const CorrespondenceSet& corrs, const CenteredCorrespondences& centered,
                           Index a, Index b, const ConsistencyOptions& options) {
  if (options.mode == ConsistencyMode::kAngle) {
    return angle_consistency_pair(centered.est.centered[a], centered.est.centered[b],
                                  centered.points.centered[a], centered.points.centered[b],
                                  options.sigma_d, options.signed_cosine);
  }
  const double est_dist = norm3(corrs.items[a].est_point - corrs.items[b].est_point);
  const double pts_dist = norm3(corrs.items[a].point - corrs.items[b].point);
  const double diff = est_dist - pts_dist;
  const double sigma2 = options.sigma_dist * options.sigma_dist;
  return {std::max(0.0, 1.0 - diff * diff / sigma2), false};
}

void check_options(const ConsistencyOptions& options) {
  if (!(options.sigma_d > 0.0) || !(options.sigma_dist > 0.0)) {
    throw DomainError("consistency sigma must be positive");
  }
}

}  // namespace

Point3 back_project(const Pixel& pixel, double depth, const CameraIntrinsics& intrinsics) {
  if (!(depth > 0.0)) {
    throw DomainError("back_project: depth must be positive, got " + std::to_string(depth));
  }
  return {(pixel.u - intrinsics.cx) * depth / intrinsics.fx,
          (pixel.v - intrinsics.cy) * depth / intrinsics.fy, depth};
}

Pixel project(const Point3& point, const CameraIntrinsics& intrinsics) {
  if (!(point.z() > 0.0)) {
    throw DomainError("project: point is not in front of the camera");
  }
  return {intrinsics.fx * point.x() / point.z() + intrinsics.cx,
          intrinsics.fy * point.y() / point.z() + intrinsics.cy};
}

CenteredCloud centroid_and_center(std::span<const Point3> points) {
  if (points.empty()) throw DomainError("centroid_and_center: empty point list");
  CenteredCloud out;
  Point3 sum = Point3::Zero();
  for (const auto& p : points) sum += p;
  out.centroid = sum / static_cast<double>(points.size());
  out.centered.reserve(points.size());
  for (const auto& p : points) out.centered.push_back(p - out.centroid);
  return out;
}

PairConsistency angle_consistency_pair(const Point3& oi, const Point3& oj, const Point3& pi,
                                       const Point3& pj, double sigma_d, bool signed_cosine) {
  if (!(sigma_d > 0.0)) throw DomainError("angle_consistency_pair: sigma_d must be positive");
  const double noi = norm3(oi);
  const double noj = norm3(oj);
  const double npi = norm3(pi);
  const double npj = norm3(pj);
  if (noi <= kDegenerateNorm || noj <= kDegenerateNorm || npi <= kDegenerateNorm ||
      npj <= kDegenerateNorm) {
    return {0.0, true};
  }
  double cos_est = dot3(oi, oj) / (noi * noj);
  double cos_pts = dot3(pi, pj) / (npi * npj);
  if (!signed_cosine) {
    cos_est = std::abs(cos_est);
    cos_pts = std::abs(cos_pts);
  }
  const double delta = std::abs(cos_est - cos_pts);
  return {std::max(0.0, 1.0 - delta * delta / (sigma_d * sigma_d)), false};
}

CenteredCorrespondences center_correspondences(const CorrespondenceSet& corrs) {
  const auto est = est_points_of(corrs);
  const auto pts = points_of(corrs);
  return {centroid_and_center(est), centroid_and_center(pts)};
}

ConsistencyMatrix consistency_matrix(const CorrespondenceSet& corrs, std::span<const Index> group,
                                     const ConsistencyOptions& options) {
  check_group(group, corrs.size(), 2);
  return consistency_matrix(corrs, center_correspondences(corrs), group, options);
}

ConsistencyMatrix consistency_matrix(const CorrespondenceSet& corrs,
                                     const CenteredCorrespondences& centered,
                                     std::span<const Index> group,
                                     const ConsistencyOptions& options) {
  check_group(group, corrs.size(), 2);
  check_options(options);
  const auto k = static_cast<Eigen::Index>(group.size());
  ConsistencyMatrix out;
  out.theta = Matrix::Identity(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const auto pc = pair_score(corrs, centered, group[i], group[j], options);
      out.theta(i, j) = pc.theta;
      out.theta(j, i) = pc.theta;
      if (pc.degenerate) ++out.degenerate_pairs;
    }
  }
  return out;
}

ConsistencyMatrix cross_consistency_matrix(const CorrespondenceSet& corrs,
                                           const CenteredCorrespondences& centered,
                                           std::span<const Index> rows,
                                           std::span<const Index> cols,
                                           const ConsistencyOptions& options) {
  check_group(rows, corrs.size(), 1);
  check_group(cols, corrs.size(), 1);
  check_options(options);
  ConsistencyMatrix out;
  out.theta.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) {
      double value = 1.0;
      if (rows[i] != cols[j]) {
        const auto pc = pair_score(corrs, centered, rows[i], cols[j], options);
        value = pc.theta;
        if (pc.degenerate) ++out.degenerate_pairs;
      }
      out.theta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = value;
    }
  }
  return out;
}

double estimate_scale(std::span<const Point3> est_points, std::span<const Point3> points) {
  if (est_points.size() != points.size()) {
    throw DomainError("estimate_scale: cloud sizes differ");
  }
  if (points.size() < 2) throw DomainError("estimate_scale: need at least 2 correspondences");
  const auto est = centroid_and_center(est_points);
  const auto pts = centroid_and_center(points);
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double denom = norm3(pts.centered[i]);
    if (denom <= kDegenerateNorm) continue;
    sum += norm3(est.centered[i]) / denom;
    ++used;
  }
  if (used == 0) throw DomainError("estimate_scale: every point sits at its centroid");
  return sum / static_cast<double>(used);
}

double estimate_scale(const CorrespondenceSet& corrs) {
  const auto est = est_points_of(corrs);
  const auto pts = points_of(corrs);
  return estimate_scale(est, pts);
}

double rescale_factor(double s_est, ScaleRatioDirection direction) {
  if (!(s_est > 0.0) || !std::isfinite(s_est)) {
    throw DomainError("rescale_factor: scale estimate must be positive and finite");
  }
  return direction == ScaleRatioDirection::kReciprocal ? 1.0 / s_est : s_est;
}

NormalEstimate estimate_normals(std::span<const Point3> points, int k) {
  if (k < 3) throw DomainError("estimate_normals: k must be at least 3");
  const std::size_t n = points.size();
  if (n < static_cast<std::size_t>(k) + 1) {
    throw DomainError("estimate_normals: need at least k + 1 points");
  }
  Point3 centroid = Point3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(n);

  NormalEstimate out;
  out.normals.resize(n);
  out.degenerate.assign(n, false);

  std::vector<Index> order(n);
  std::vector<double> dist2(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) dist2[j] = (points[j] - points[i]).squaredNorm();
    std::iota(order.begin(), order.end(), Index{0});
    // The point itself plus its k nearest neighbours.
    std::partial_sort(order.begin(), order.begin() + k + 1, order.end(),
                      [&](Index a, Index b) { return dist2[a] < dist2[b] || (dist2[a] == dist2[b] && a < b); });

    Point3 mean = Point3::Zero();
    for (int m = 0; m <= k; ++m) mean += points[order[m]];
    mean /= static_cast<double>(k + 1);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (int m = 0; m <= k; ++m) {
      const Point3 d = points[order[m]] - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
    const auto& evals = solver.eigenvalues();
    if (solver.info() != Eigen::Success || evals(1) <= 1e-12 * std::max(evals(2), 1e-300)) {
      out.normals[i] = Point3::UnitZ();
      out.degenerate[i] = true;
      continue;
    }
    Point3 normal = solver.eigenvectors().col(0).normalized();
    const Point3 outward = points[i] - centroid;
    const double facing = normal.dot(outward);
    if (std::abs(facing) > 1e-9 * outward.norm()) {
      if (facing < 0.0) normal = -normal;
    } else {
      // No outward direction to face: make the dominant component positive.
      Eigen::Index dominant = 0;
      normal.cwiseAbs().maxCoeff(&dominant);
      if (normal(dominant) < 0.0) normal = -normal;
    }
    out.normals[i] = normal;
  }
  return out;
}

Matrix initial_features(const CorrespondenceSet& corrs, double est_rescale,
                        std::span<const Point3> normals_est,
                        std::span<const Point3> normals_points) {
  const std::size_t n = corrs.size();
  if (normals_est.size() != n || normals_points.size() != n) {
    throw DomainError("initial_features: normal lists must align with correspondences");
  }
  const auto centered = center_correspondences(corrs);
  Matrix features(static_cast<Eigen::Index>(n), kFeatureWidth);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    Eigen::Matrix<double, 6, 1> c;
    c << est_rescale * centered.est.centered[i], centered.points.centered[i];
    for (int m = 0; m < 6; ++m) {
      features(row, m) = c(m);
      features(row, 6 + m) = std::sin(0.5 * c(m));
      features(row, 12 + m) = std::cos(0.5 * c(m));
    }
    for (int m = 0; m < 3; ++m) {
      features(row, 18 + m) = normals_est[i](m);
      features(row, 21 + m) = normals_points[i](m);
    }
  }
  return features;
}

std::vector<Point3> est_points_of(const CorrespondenceSet& corrs) {
  std::vector<Point3> out;
  out.reserve(corrs.size());
  for (const auto& c : corrs.items) out.push_back(c.est_point);
  return out;
}

std::vector<Point3> points_of(const CorrespondenceSet& corrs) {
  std::vector<Point3> out;
  out.reserve(corrs.size());
  for (const auto& c : corrs.items) out.push_back(c.point);
  return out;
}

}  // namespace angle_i2p
