#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "angle_i2p/geometry.hpp"
#include "angle_i2p/pnp.hpp"
#include "angle_i2p/pose_eval.hpp"
#include "angle_i2p/reference.hpp"
#include "angle_i2p/synth.hpp"
#include "support.hpp"

namespace angle_i2p {
namespace {

std::vector<Pixel> pixels_of(const CorrespondenceSet& s) {
  std::vector<Pixel> out;
  for (const auto& c : s.items) out.push_back(c.pixel);
  return out;
}

double rot_err(const Pose& a, const Pose& b) { return rotation_error(a.rotation, b.rotation); }
double trans_err(const Pose& a, const Pose& b) {
  return translation_error(a.translation, b.translation);
}

TEST(PoseType, InverseAndCompose) {
  std::mt19937_64 rng(1);
  const auto p = test::random_pose(rng);
  const auto id = p.compose(p.inverse());
  EXPECT_LT((id.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(id.translation.norm(), 1e-12);
  EXPECT_TRUE(p.is_valid());
  Pose bad;
  bad.rotation(0, 0) = 2.0;
  EXPECT_FALSE(bad.is_valid());
}

TEST(RotationError, Basics) {
  std::mt19937_64 rng(2);
  const Eigen::Matrix3d r = test::random_rotation(rng);
  EXPECT_EQ(rotation_error(r, r), 0.0);
  EXPECT_EQ(translation_error(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3)), 0.0);
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(10.0 * M_PI / 180.0, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  EXPECT_NEAR(rotation_error(rz * r, r), 10.0, 1e-9);
  EXPECT_NEAR(translation_error(Eigen::Vector3d(0, 0, 0), Eigen::Vector3d(3, 4, 0)), 5.0, 1e-15);
}

TEST(RotationError, MatchesQuaternionReference) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto a = test::random_rotation(rng);
    const auto b = test::random_rotation(rng);
    EXPECT_NEAR(rotation_error(a, b), reference::quaternion_rotation_error(a, b), 1e-9);
  }
  // Near-identity and near-half-turn are the ill-conditioned ends.
  const auto a = test::random_rotation(rng);
  for (double deg : {1e-7, 1e-3, 179.9, 180.0}) {
    const Eigen::Matrix3d d = Eigen::AngleAxisd(deg * M_PI / 180.0, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    EXPECT_NEAR(rotation_error(d * a, a), reference::quaternion_rotation_error(d * a, a), 1e-9);
    EXPECT_NEAR(rotation_error(d * a, a), deg, 1e-9);
  }
}

TEST(Dlt, ExactRecovery) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pose = test::random_pose(rng);
    const auto set = test::exact_set(20, pose, rng);
    const auto pts = points_of(set);
    const auto px = pixels_of(set);
    const auto est = solve_pnp_dlt(px, pts, set.intrinsics);
    ASSERT_TRUE(est.has_value());
    EXPECT_LT(rot_err(*est, pose), 1e-6);
    EXPECT_LT(trans_err(*est, pose), 1e-8);
    EXPECT_TRUE(est->is_valid(1e-9));
  }
}

TEST(Dlt, TooFewPoints) {
  std::mt19937_64 rng(5);
  const auto set = test::exact_set(5, Pose::identity(), rng);
  EXPECT_FALSE(solve_pnp_dlt(pixels_of(set), points_of(set), set.intrinsics).has_value());
}

TEST(Planar, RecoversPoseOfAWall) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Pose pose;
  pose.rotation = Eigen::AngleAxisd(0.3, Eigen::Vector3d(0.2, 1, 0.1).normalized()).toRotationMatrix();
  pose.translation = Eigen::Vector3d(0.1, -0.2, 4.0);
  std::vector<Point3> pts;
  std::vector<Pixel> px;
  const auto k = default_intrinsics();
  while (pts.size() < 30) {
    const Point3 w(u(rng), u(rng), 0.0);
    const Point3 c = pose.apply(w);
    const auto p = project(c, k);
    if (p.u < 0 || p.u > k.width || p.v < 0 || p.v > k.height) continue;
    pts.push_back(w);
    px.push_back(p);
  }
  const auto planar = solve_pnp_planar(px, pts, k);
  ASSERT_TRUE(planar.has_value());
  EXPECT_LT(rot_err(*planar, pose), 1e-6);
  EXPECT_LT(trans_err(*planar, pose), 1e-8);
  const auto linear = solve_pnp_linear(px, pts, k);
  ASSERT_TRUE(linear.has_value());
  EXPECT_LT(rot_err(*linear, pose), 1e-6);
}

TEST(P3p, OneRootIsTheTruePose) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pose = test::random_pose(rng);
    const auto set = test::exact_set(3, pose, rng);
    const auto poses = solve_p3p(pixels_of(set), points_of(set), set.intrinsics);
    ASSERT_FALSE(poses.empty());
    EXPECT_LE(poses.size(), 4u);
    double best = 1e9;
    for (const auto& p : poses) best = std::min(best, rot_err(p, pose) + trans_err(p, pose));
    EXPECT_LT(best, 1e-6);
  }
}

TEST(Refine, ConvergesFromPerturbedStart) {
  std::mt19937_64 rng(8);
  const auto pose = test::random_pose(rng);
  const auto set = test::exact_set(30, pose, rng);
  Pose start = pose;
  start.rotation = Eigen::AngleAxisd(0.05, Eigen::Vector3d::UnitY()).toRotationMatrix() * pose.rotation;
  start.translation += Eigen::Vector3d(0.05, -0.03, 0.02);
  const auto refined = refine_pose(start, pixels_of(set), points_of(set), set.intrinsics);
  EXPECT_LT(rot_err(refined, pose), 1e-6);
  EXPECT_LT(trans_err(refined, pose), 1e-8);
}

TEST(Reprojection, BehindCameraIsInfinite) {
  const auto k = default_intrinsics();
  EXPECT_TRUE(std::isinf(reprojection_error(Pose::identity(), Point3(0, 0, -1), {0, 0}, k)));
  EXPECT_NEAR(reprojection_error(Pose::identity(), Point3(0, 0, 2), {k.cx + 3, k.cy + 4}, k), 5.0,
              1e-12);
}

TEST(Ransac, NoiselessAllInliers) {
  std::mt19937_64 rng(9);
  for (auto solver : {HypothesisSolver::kDlt6, HypothesisSolver::kP3P}) {
    const auto pose = test::random_pose(rng);
    const auto set = test::exact_set(20, pose, rng);
    RansacOptions opt;
    opt.solver = solver;
    const auto r = solve_pnp_ransac(set, opt);
    ASSERT_TRUE(r.success);
    EXPECT_EQ(r.num_inliers, 20u);
    EXPECT_LT(rot_err(r.pose, pose), 1e-6);
    EXPECT_LT(trans_err(r.pose, pose), 1e-8);
  }
}

TEST(Ransac, RejectsGrossOutliers) {
  SceneConfig cfg;
  cfg.n_points = 100;
  cfg.outlier_ratio = 0.5;
  cfg.pixel_noise_px = 0.5;
  cfg.room.width = 4.0;
  cfg.room.length = 4.0;
  cfg.room.height = 2.5;
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    cfg.seed = seed;
    const auto scene = generate_scene(cfg);
    RansacOptions opt;
    opt.seed = seed;
    const auto r = solve_pnp_ransac(scene.corrs, opt);
    if (r.success && rot_err(r.pose, *scene.corrs.gt_pose) < 1.0 &&
        trans_err(r.pose, *scene.corrs.gt_pose) < 0.05)
      ++ok;
  }
  EXPECT_GE(ok, 9);
}

TEST(Ransac, DeterministicPerSeedAndFailsGracefully) {
  SceneConfig cfg;
  cfg.n_points = 60;
  cfg.outlier_ratio = 0.5;
  cfg.pixel_noise_px = 1.0;
  cfg.seed = 3;
  const auto scene = generate_scene(cfg);
  RansacOptions opt;
  opt.seed = 42;
  const auto a = solve_pnp_ransac(scene.corrs, opt);
  const auto b = solve_pnp_ransac(scene.corrs, opt);
  EXPECT_EQ(a.pose.rotation, b.pose.rotation);
  EXPECT_EQ(a.inlier_mask, b.inlier_mask);

  CorrespondenceSet tiny = scene.corrs;
  tiny.items.resize(5);
  tiny.gt_labels.reset();
  EXPECT_FALSE(solve_pnp_ransac(tiny).success);
}

TEST(Labels, PerfectAndDisplaced) {
  std::mt19937_64 rng(10);
  const auto pose = test::random_pose(rng);
  auto set = test::exact_set(10, pose, rng);
  set.items[3].point += 0.2 * (pose.rotation.transpose() * Eigen::Vector3d::UnitX());
  const auto labels = label_inliers(set, 0.05);
  for (std::size_t i = 0; i < labels.size(); ++i) EXPECT_EQ(labels[i], i != 3);
  CorrespondenceSet no_pose = set;
  no_pose.gt_pose.reset();
  EXPECT_THROW(label_inliers(no_pose), DomainError);
}

TEST(Labels, ErrorsAreLateralOffsets) {
  const auto k = default_intrinsics();
  CorrespondenceSet set;
  set.intrinsics = k;
  set.gt_pose = Pose::identity();
  for (double dx : {0.01, 0.2, 0.04}) {
    set.items.push_back(make_correspondence({k.cx, k.cy}, Point3(dx, 0.0, 3.0), 3.0, k));
  }
  const auto err = correspondence_errors(set, Pose::identity());
  EXPECT_NEAR(err[0], 0.01, 1e-12);
  EXPECT_NEAR(err[1], 0.2, 1e-12);
  EXPECT_NEAR(err[2], 0.04, 1e-12);
  const auto m = evaluate_scene(set, Pose::identity());
  EXPECT_NEAR(m.inlier_ratio, 2.0 / 3.0, 1e-15);
}

TEST(EvaluateScene, PerfectScene) {
  std::mt19937_64 rng(11);
  const auto pose = test::random_pose(rng);
  const auto set = test::exact_set(40, pose, rng);
  const auto m = evaluate_scene(set, pose);
  EXPECT_EQ(m.inlier_ratio, 1.0);
  EXPECT_TRUE(m.pnp_success);
  EXPECT_LT(m.rotation_error_deg, 1e-6);
  EXPECT_LT(m.translation_error_m, 1e-8);
  EXPECT_TRUE(m.rr_pass);
  EXPECT_EQ(EvalThresholds{}.inlier_threshold, 0.05);
  EXPECT_EQ(EvalThresholds{}.registration_threshold, 0.1);
}

TEST(EvaluateScene, EmptySetCountsAsFailure) {
  CorrespondenceSet empty;
  empty.intrinsics = default_intrinsics();
  const auto m = evaluate_scene(empty, Pose::identity());
  EXPECT_FALSE(m.pnp_success);
  EXPECT_FALSE(m.rr_pass);
  EXPECT_EQ(m.inlier_ratio, 0.0);
}

TEST(Aggregate, MeansOverSuccessesOnly) {
  std::vector<SceneMetrics> s(3);
  s[0] = {"a", 10, 0.5, true, 1.0, 0.02, 0.01, 1.0, true};
  s[1] = {"b", 10, 0.3, true, 3.0, 0.04, 0.2, 0.1, false};
  s[2] = {"c", 10, 0.1, false, NAN, NAN, INFINITY, 0.0, false};
  const auto r = aggregate(s, {});
  EXPECT_NEAR(r.inlier_ratio, 0.3, 1e-15);
  EXPECT_NEAR(r.registration_recall, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.mean_rotation_error, 2.0, 1e-15);
  EXPECT_NEAR(r.mean_translation_error, 0.03, 1e-15);
  EXPECT_EQ(r.pnp_failures, 1u);

  std::ostringstream csv, summary;
  write_metrics_csv(csv, s);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "scene,ir,mre_deg,mte_m,rr_pass");
  write_summary(summary, r);
  EXPECT_NE(summary.str().find("\"pnp_failures\": 1"), std::string::npos);
}

}  // namespace
}  // namespace angle_i2p
