#include "angle_i2p/pnp.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>

namespace angle_i2p {
namespace {

struct Consensus {
  std::size_t count = 0;
  double total_error = 0.0;
  std::vector<bool> mask;
};

Consensus score_pose(const Pose& pose, const CorrespondenceSet& corrs, double threshold) {
  Consensus c;
  c.mask.assign(corrs.size(), false);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double err =
        reprojection_error(pose, corrs.items[i].point, corrs.items[i].pixel, corrs.intrinsics);
    if (err < threshold) {
      c.mask[i] = true;
      ++c.count;
      c.total_error += err;
    }
  }
  return c;
}

std::optional<Pose> fit_subset(const CorrespondenceSet& corrs, std::span<const Index> subset) {
  std::vector<Pixel> pixels;
  std::vector<Point3> points;
  pixels.reserve(subset.size());
  points.reserve(subset.size());
  for (Index i : subset) {
    pixels.push_back(corrs.items[i].pixel);
    points.push_back(corrs.items[i].point);
  }
  return solve_pnp_linear(pixels, points, corrs.intrinsics);
}

double summed_error(const Pose& pose, std::span<const Pixel> pixels, std::span<const Point3> points,
                    const CameraIntrinsics& intrinsics) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double e = reprojection_error(pose, points[i], pixels[i], intrinsics);
    total += e * e;
  }
  return total;
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d s;
  s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return s;
}

Pose refine_subset(const CorrespondenceSet& corrs, std::span<const Index> subset,
                   const Pose& initial) {
  std::vector<Pixel> pixels;
  std::vector<Point3> points;
  pixels.reserve(subset.size());
  points.reserve(subset.size());
  for (Index i : subset) {
    pixels.push_back(corrs.items[i].pixel);
    points.push_back(corrs.items[i].point);
  }
  return refine_pose(initial, pixels, points, corrs.intrinsics);
}

double subset_cost(const CorrespondenceSet& corrs, std::span<const Index> subset,
                   const Pose& pose) {
  double total = 0.0;
  for (Index i : subset) {
    const double e =
        reprojection_error(pose, corrs.items[i].point, corrs.items[i].pixel, corrs.intrinsics);
    total += e * e;
  }
  return total;
}

std::vector<Index> mask_indices(const std::vector<bool>& mask) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(i);
  return out;
}

bool better(const Consensus& a, const Consensus& b) {
  return a.count > b.count || (a.count == b.count && a.total_error < b.total_error);
}

}  // namespace

std::optional<Pose> solve_pnp_dlt(std::span<const Pixel> pixels, std::span<const Point3> points,
                                  const CameraIntrinsics& intrinsics) {
  const std::size_t n = pixels.size();
  if (n != points.size() || n < kPnpMinimalSet) return std::nullopt;

  // Normalized camera coordinates, then Hartley conditioning on both sides.
  std::vector<Eigen::Vector2d> image(n);
  Eigen::Vector2d image_mean = Eigen::Vector2d::Zero();
  Point3 world_mean = Point3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    image[i] = {(pixels[i].u - intrinsics.cx) / intrinsics.fx,
                (pixels[i].v - intrinsics.cy) / intrinsics.fy};
    image_mean += image[i];
    world_mean += points[i];
  }
  image_mean /= static_cast<double>(n);
  world_mean /= static_cast<double>(n);
  double image_spread = 0.0;
  double world_spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    image_spread += (image[i] - image_mean).norm();
    world_spread += (points[i] - world_mean).norm();
  }
  image_spread /= static_cast<double>(n);
  world_spread /= static_cast<double>(n);
  if (!(image_spread > 1e-12) || !(world_spread > 1e-12)) return std::nullopt;
  const double image_scale = std::sqrt(2.0) / image_spread;
  const double world_scale = std::sqrt(3.0) / world_spread;

  Eigen::MatrixXd a(2 * n, 12);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d x = (image[i] - image_mean) * image_scale;
    Eigen::Vector4d w;
    w << (points[i] - world_mean) * world_scale, 1.0;
    const auto r0 = static_cast<Eigen::Index>(2 * i);
    a.row(r0) << w.transpose(), Eigen::RowVector4d::Zero(), -x.x() * w.transpose();
    a.row(r0 + 1) << Eigen::RowVector4d::Zero(), w.transpose(), -x.y() * w.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> p_norm;
  p_norm << h.segment<4>(0).transpose(), h.segment<4>(4).transpose(), h.segment<4>(8).transpose();

  Eigen::Matrix3d image_t = Eigen::Matrix3d::Identity();
  image_t(0, 0) = image_t(1, 1) = image_scale;
  image_t.block<2, 1>(0, 2) = -image_scale * image_mean;
  Eigen::Matrix4d world_t = Eigen::Matrix4d::Identity();
  world_t.block<3, 3>(0, 0) *= world_scale;
  world_t.block<3, 1>(0, 3) = -world_scale * world_mean;
  Eigen::Matrix<double, 3, 4> proj = image_t.inverse() * p_norm * world_t;

  Eigen::Matrix3d m = proj.leftCols<3>();
  if (m.determinant() < 0.0) {
    proj = -proj;
    m = -m;
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = msvd.singularValues().mean();
  if (!(scale > 1e-12) || !std::isfinite(scale)) return std::nullopt;
  Pose pose;
  pose.rotation = msvd.matrixU() * msvd.matrixV().transpose();
  if (pose.rotation.determinant() < 0.0) return std::nullopt;
  pose.translation = proj.col(3) / scale;
  if (!pose.rotation.allFinite() || !pose.translation.allFinite()) return std::nullopt;
  return pose;
}

std::optional<Pose> solve_pnp_planar(std::span<const Pixel> pixels, std::span<const Point3> points,
                                     const CameraIntrinsics& intrinsics) {
  const std::size_t n = pixels.size();
  if (n != points.size() || n < kPnpMinimalSet) return std::nullopt;

  Point3 centroid = Point3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(n);
  Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
  for (const auto& p : points) scatter += (p - centroid) * (p - centroid).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
  if (!(eig.eigenvalues()(1) > 1e-12 * std::max(eig.eigenvalues()(2), 1e-300))) return std::nullopt;
  // Columns: the two in-plane axes, then the plane normal.
  Eigen::Matrix3d basis;
  basis.col(0) = eig.eigenvectors().col(2);
  basis.col(1) = eig.eigenvectors().col(1);
  basis.col(2) = basis.col(0).cross(basis.col(1));

  std::vector<Eigen::Vector2d> plane(n);
  std::vector<Eigen::Vector2d> image(n);
  Eigen::Vector2d image_mean = Eigen::Vector2d::Zero();
  double plane_spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point3 local = basis.transpose() * (points[i] - centroid);
    plane[i] = local.head<2>();
    plane_spread += plane[i].norm();
    image[i] = {(pixels[i].u - intrinsics.cx) / intrinsics.fx,
                (pixels[i].v - intrinsics.cy) / intrinsics.fy};
    image_mean += image[i];
  }
  image_mean /= static_cast<double>(n);
  plane_spread /= static_cast<double>(n);
  double image_spread = 0.0;
  for (const auto& x : image) image_spread += (x - image_mean).norm();
  image_spread /= static_cast<double>(n);
  if (!(plane_spread > 1e-12) || !(image_spread > 1e-12)) return std::nullopt;
  const double plane_scale = std::sqrt(2.0) / plane_spread;
  const double image_scale = std::sqrt(2.0) / image_spread;

  Eigen::MatrixXd a(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector3d w;
    w << plane[i] * plane_scale, 1.0;
    const Eigen::Vector2d x = (image[i] - image_mean) * image_scale;
    const auto r0 = static_cast<Eigen::Index>(2 * i);
    a.row(r0) << w.transpose(), Eigen::RowVector3d::Zero(), -x.x() * w.transpose();
    a.row(r0 + 1) << Eigen::RowVector3d::Zero(), w.transpose(), -x.y() * w.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d h_norm;
  h_norm << h.segment<3>(0).transpose(), h.segment<3>(3).transpose(), h.segment<3>(6).transpose();
  Eigen::Matrix3d image_t = Eigen::Matrix3d::Identity();
  image_t(0, 0) = image_t(1, 1) = image_scale;
  image_t.block<2, 1>(0, 2) = -image_scale * image_mean;
  Eigen::Matrix3d plane_t = Eigen::Matrix3d::Identity();
  plane_t(0, 0) = plane_t(1, 1) = plane_scale;
  Eigen::Matrix3d hom = image_t.inverse() * h_norm * plane_t;

  const double lambda = 0.5 * (hom.col(0).norm() + hom.col(1).norm());
  if (!(lambda > 1e-12) || !std::isfinite(lambda)) return std::nullopt;
  hom /= lambda;
  // The plane origin (the centroid) must land in front of the camera.
  if (hom(2, 2) < 0.0) hom = -hom;
  Eigen::Matrix3d r_plane;
  r_plane.col(0) = hom.col(0);
  r_plane.col(1) = hom.col(1);
  r_plane.col(2) = hom.col(0).cross(hom.col(1));
  r_plane = nearest_rotation(r_plane);

  Pose pose;
  pose.rotation = r_plane * basis.transpose();
  pose.translation = hom.col(2) - pose.rotation * centroid;
  if (!pose.rotation.allFinite() || !pose.translation.allFinite()) return std::nullopt;
  return pose;
}

std::optional<Pose> solve_pnp_linear(std::span<const Pixel> pixels, std::span<const Point3> points,
                                     const CameraIntrinsics& intrinsics) {
  const auto general = solve_pnp_dlt(pixels, points, intrinsics);
  const auto planar = solve_pnp_planar(pixels, points, intrinsics);
  if (!general) return planar;
  if (!planar) return general;
  return summed_error(*planar, pixels, points, intrinsics) <
                 summed_error(*general, pixels, points, intrinsics)
             ? planar
             : general;
}

Pose refine_pose(const Pose& initial, std::span<const Pixel> pixels, std::span<const Point3> points,
                 const CameraIntrinsics& intrinsics, int iterations) {
  const std::size_t n = std::min(pixels.size(), points.size());
  Pose pose = initial;
  double cost = summed_error(pose, pixels, points, intrinsics);
  if (!std::isfinite(cost) || n < 3) return initial;
  double damping = 1e-3;
  for (int it = 0; it < iterations; ++it) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Point3 rotated = pose.rotation * points[i];
      const Point3 cam = rotated + pose.translation;
      const double iz = 1.0 / cam.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << intrinsics.fx * iz, 0.0, -intrinsics.fx * cam.x() * iz * iz, 0.0,
          intrinsics.fy * iz, -intrinsics.fy * cam.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dcam;
      dcam << -skew(rotated), Eigen::Matrix3d::Identity();
      const Eigen::Matrix<double, 2, 6> j = dproj * dcam;
      const Eigen::Vector2d r(intrinsics.fx * cam.x() * iz + intrinsics.cx - pixels[i].u,
                              intrinsics.fy * cam.y() * iz + intrinsics.cy - pixels[i].v);
      jtj += j.transpose() * j;
      jtr += j.transpose() * r;
    }
    bool improved = false;
    while (damping < 1e8) {
      Eigen::Matrix<double, 6, 6> lhs = jtj;
      lhs.diagonal() *= 1.0 + damping;
      const Eigen::Matrix<double, 6, 1> step = -lhs.ldlt().solve(jtr);
      if (!step.allFinite()) break;
      Pose trial;
      const Eigen::Vector3d w = step.head<3>();
      const double angle = w.norm();
      const Eigen::Matrix3d rot =
          angle > 0.0 ? Eigen::AngleAxisd(angle, w / angle).toRotationMatrix()
                      : Eigen::Matrix3d::Identity();
      trial.rotation = nearest_rotation(rot * pose.rotation);
      // R <- exp(w) R, t <- t + dt, matching dcam above.
      trial.translation = pose.translation + step.tail<3>();
      const double trial_cost = summed_error(trial, pixels, points, intrinsics);
      if (trial_cost < cost) {
        const bool converged = cost - trial_cost <= 1e-12 * cost;
        pose = trial;
        cost = trial_cost;
        damping = std::max(damping * 0.1, 1e-12);
        improved = !converged;
        break;
      }
      damping *= 10.0;
    }
    if (!improved) break;
  }
  return pose;
}

std::vector<Pose> solve_p3p(std::span<const Pixel> pixels, std::span<const Point3> points,
                            const CameraIntrinsics& intrinsics) {
  std::vector<Pose> poses;
  if (pixels.size() < 3 || points.size() < 3) return poses;
  Eigen::Vector3d j[3];
  for (int i = 0; i < 3; ++i) {
    j[i] = Eigen::Vector3d((pixels[i].u - intrinsics.cx) / intrinsics.fx,
                           (pixels[i].v - intrinsics.cy) / intrinsics.fy, 1.0)
               .normalized();
  }
  const double a2 = (points[1] - points[2]).squaredNorm();
  const double b2 = (points[0] - points[2]).squaredNorm();
  const double c2 = (points[0] - points[1]).squaredNorm();
  if (!(a2 > 1e-18 && b2 > 1e-18 && c2 > 1e-18)) return poses;
  if ((points[1] - points[0]).cross(points[2] - points[0]).norm() <= 1e-12) return poses;
  const double ca = j[1].dot(j[2]);
  const double cb = j[0].dot(j[2]);
  const double cg = j[0].dot(j[1]);

  // Grunert: s2 = u s1, s3 = v s1, quartic in v.
  const double amc = (a2 - c2) / b2;
  const double apc = (a2 + c2) / b2;
  const double coeff[5] = {
      (1.0 + amc) * (1.0 + amc) - 4.0 * a2 / b2 * cg * cg,
      4.0 * (-amc * (1.0 + amc) * cb + 2.0 * a2 / b2 * cg * cg * cb - (1.0 - apc) * ca * cg),
      2.0 * (amc * amc - 1.0 + 2.0 * amc * amc * cb * cb + 2.0 * (b2 - c2) / b2 * ca * ca -
             4.0 * apc * ca * cb * cg + 2.0 * (b2 - a2) / b2 * cg * cg),
      4.0 * (amc * (1.0 - amc) * cb - (1.0 - apc) * ca * cg + 2.0 * c2 / b2 * ca * ca * cb),
      (amc - 1.0) * (amc - 1.0) - 4.0 * c2 / b2 * ca * ca,
  };
  if (!(std::abs(coeff[4]) > 1e-14)) return poses;
  Eigen::Matrix4d companion = Eigen::Matrix4d::Zero();
  for (int r = 0; r < 4; ++r) companion(r, 3) = -coeff[r] / coeff[4];
  for (int r = 1; r < 4; ++r) companion(r, r - 1) = 1.0;
  Eigen::EigenSolver<Eigen::Matrix4d> roots(companion, false);
  if (roots.info() != Eigen::Success) return poses;

  Eigen::Matrix3d world;
  for (int i = 0; i < 3; ++i) world.col(i) = points[i];
  for (int r = 0; r < 4; ++r) {
    const auto root = roots.eigenvalues()(r);
    if (std::abs(root.imag()) > 1e-6 * std::max(1.0, std::abs(root.real()))) continue;
    const double v = root.real();
    if (!(v > 0.0)) continue;
    const double denom = 2.0 * (cg - v * ca);
    if (std::abs(denom) < 1e-12) continue;
    const double u = ((-1.0 + amc) * v * v - 2.0 * amc * cb * v + 1.0 + amc) / denom;
    const double q = 1.0 + v * v - 2.0 * v * cb;
    if (!(u > 0.0) || !(q > 1e-15)) continue;
    Eigen::Vector3d dist;
    dist(0) = std::sqrt(b2 / q);
    dist(1) = u * dist(0);
    dist(2) = v * dist(0);
    // Newton on the three law-of-cosines residuals.
    for (int it = 0; it < 5; ++it) {
      const double s1 = dist(0), s2 = dist(1), s3 = dist(2);
      Eigen::Vector3d f(s1 * s1 + s2 * s2 - 2.0 * s1 * s2 * cg - c2,
                        s1 * s1 + s3 * s3 - 2.0 * s1 * s3 * cb - b2,
                        s2 * s2 + s3 * s3 - 2.0 * s2 * s3 * ca - a2);
      Eigen::Matrix3d jac;
      jac << 2.0 * s1 - 2.0 * s2 * cg, 2.0 * s2 - 2.0 * s1 * cg, 0.0,
          2.0 * s1 - 2.0 * s3 * cb, 0.0, 2.0 * s3 - 2.0 * s1 * cb,
          0.0, 2.0 * s2 - 2.0 * s3 * ca, 2.0 * s3 - 2.0 * s2 * ca;
      const Eigen::Vector3d step = jac.fullPivLu().solve(f);
      if (!step.allFinite()) break;
      dist -= step;
    }
    if (!(dist.array() > 0.0).all()) continue;
    Eigen::Matrix3d camera;
    for (int i = 0; i < 3; ++i) camera.col(i) = dist(i) * j[i];
    const Eigen::Matrix4d rigid = Eigen::umeyama(world, camera, false);
    Pose pose;
    pose.rotation = nearest_rotation(rigid.block<3, 3>(0, 0));
    pose.translation = rigid.block<3, 1>(0, 3);
    if (pose.rotation.allFinite() && pose.translation.allFinite()) poses.push_back(pose);
  }
  return poses;
}

double reprojection_error(const Pose& pose, const Point3& point, const Pixel& pixel,
                          const CameraIntrinsics& intrinsics) {
  const Point3 cam = pose.apply(point);
  if (!(cam.z() > 0.0)) return std::numeric_limits<double>::infinity();
  const double u = intrinsics.fx * cam.x() / cam.z() + intrinsics.cx;
  const double v = intrinsics.fy * cam.y() / cam.z() + intrinsics.cy;
  return std::hypot(u - pixel.u, v - pixel.v);
}

PnpResult solve_pnp_ransac(const CorrespondenceSet& corrs, const RansacOptions& options) {
  PnpResult result;
  result.inlier_mask.assign(corrs.size(), false);
  if (corrs.size() < kPnpMinimalSet || options.iterations < 1) return result;

  std::mt19937_64 rng(options.seed);
  std::vector<Index> pool(corrs.size());
  std::iota(pool.begin(), pool.end(), Index{0});
  const bool p3p = options.solver == HypothesisSolver::kP3P;
  std::vector<Index> sample(p3p ? 3 : kPnpMinimalSet);
  std::vector<Pixel> sample_pixels(sample.size());
  std::vector<Point3> sample_points(sample.size());

  Consensus best;
  Pose best_pose;
  auto consider = [&](const Pose& hypothesis) {
    auto consensus = score_pose(hypothesis, corrs, options.reprojection_threshold_px);
    if (better(consensus, best)) {
      best = std::move(consensus);
      best_pose = hypothesis;
    }
  };
  for (int it = 0; it < options.iterations; ++it) {
    // Partial Fisher-Yates draw of distinct indices.
    for (std::size_t s = 0; s < sample.size(); ++s) {
      std::uniform_int_distribution<std::size_t> pick(s, pool.size() - 1);
      std::swap(pool[s], pool[pick(rng)]);
      sample[s] = pool[s];
    }
    if (p3p) {
      for (std::size_t s = 0; s < sample.size(); ++s) {
        sample_pixels[s] = corrs.items[sample[s]].pixel;
        sample_points[s] = corrs.items[sample[s]].point;
      }
      for (const auto& hypothesis : solve_p3p(sample_pixels, sample_points, corrs.intrinsics)) {
        consider(hypothesis);
      }
      continue;
    }
    auto hypothesis = fit_subset(corrs, sample);
    if (!hypothesis) continue;
    if (options.refine) hypothesis = refine_subset(corrs, sample, *hypothesis);
    consider(*hypothesis);
  }
  if (best.count < kPnpMinimalSet) return result;

  // The reported pose is always a fit to a consensus set. Further rounds run
  // only while the consensus does not shrink.
  for (int round = 0; round < 3; ++round) {
    const auto members = mask_indices(best.mask);
    auto refit = fit_subset(corrs, members);
    if (options.refine) {
      // Polish from both the linear refit and the standing pose.
      Pose polished = refine_subset(corrs, members, best_pose);
      if (refit) {
        const Pose from_linear = refine_subset(corrs, members, *refit);
        if (subset_cost(corrs, members, from_linear) < subset_cost(corrs, members, polished)) {
          polished = from_linear;
        }
      }
      refit = polished;
    }
    if (!refit) break;
    auto consensus = score_pose(*refit, corrs, options.reprojection_threshold_px);
    if (consensus.count < kPnpMinimalSet) break;
    const bool same_set = consensus.mask == best.mask;
    const bool shrank = consensus.count < best.count;
    best = std::move(consensus);
    best_pose = *refit;
    if (same_set || shrank) break;
  }
  result.success = true;
  result.pose = best_pose;
  result.inlier_mask = best.mask;
  result.num_inliers = best.count;
  return result;
}

}  // namespace angle_i2p
