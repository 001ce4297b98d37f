#include "angle_i2p/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Geometry>

#include "angle_i2p/correspondence_io.hpp"
#include "angle_i2p/geometry.hpp"

namespace angle_i2p {
namespace {

struct Box {
  Point3 lo;
  Point3 hi;
  bool contains(const Point3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

/// Entry distance of a ray into an axis-aligned box, +inf on a miss.
double ray_box_entry(const Point3& origin, const Point3& dir, const Box& box) {
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir(a)) < 1e-15) {
      if (origin(a) < box.lo(a) || origin(a) > box.hi(a)) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (box.lo(a) - origin(a)) / dir(a);
    double t1 = (box.hi(a) - origin(a)) / dir(a);
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_near <= 1e-9) return std::numeric_limits<double>::infinity();
  return t_near;
}

/// Exit distance of a ray leaving the room from inside.
double ray_room_exit(const Point3& origin, const Point3& dir, const Box& room) {
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir(a) > 1e-15) t_exit = std::min(t_exit, (room.hi(a) - origin(a)) / dir(a));
    if (dir(a) < -1e-15) t_exit = std::min(t_exit, (room.lo(a) - origin(a)) / dir(a));
  }
  return t_exit;
}

Box room_box(const RoomConfig& room) {
  return {{-room.width / 2, -room.length / 2, 0.0}, {room.width / 2, room.length / 2, room.height}};
}

std::vector<Box> make_clutter(const RoomConfig& room, const Point3& camera, std::mt19937_64& rng) {
  std::vector<Box> boxes;
  std::uniform_real_distribution<double> size(0.3, 1.2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int attempts = 0;
  while (static_cast<int>(boxes.size()) < room.clutter_boxes && attempts++ < 1000) {
    const double sx = size(rng);
    const double sy = size(rng);
    const double sz = size(rng);
    const double x = -room.width / 2 + unit(rng) * (room.width - sx);
    const double y = -room.length / 2 + unit(rng) * (room.length - sy);
    Box b{{x, y, 0.0}, {x + sx, y + sy, sz}};
    // Keep a clear margin around the camera.
    Box grown{b.lo - Point3::Constant(0.3), b.hi + Point3::Constant(0.3)};
    if (grown.contains(camera)) continue;
    boxes.push_back(b);
  }
  return boxes;
}

}  // namespace

std::string to_string(OutlierMode mode) {
  return mode == OutlierMode::kUniformResample ? "uniform_resample" : "pixel_shuffle";
}

OutlierMode parse_outlier_mode(const std::string& text) {
  if (text == "uniform_resample") return OutlierMode::kUniformResample;
  if (text == "pixel_shuffle") return OutlierMode::kPixelShuffle;
  throw DomainError("unknown outlier mode '" + text + "'");
}

CameraIntrinsics default_intrinsics() { return {525.0, 525.0, 319.5, 239.5, 640.0, 480.0}; }

void SceneConfig::validate() const {
  intrinsics.validate();
  if (n_points < 6) throw DomainError("scene config: n_points must be at least 6");
  if (!(depth_scale > 0.0)) throw DomainError("scene config: depth_scale must be positive");
  if (!(outlier_ratio >= 0.0 && outlier_ratio < 1.0)) {
    throw DomainError("scene config: outlier_ratio must lie in [0, 1)");
  }
  if (depth_noise_sigma < 0.0 || pixel_noise_px < 0.0) {
    throw DomainError("scene config: noise levels must be non-negative");
  }
  if (!(room.width > 2.0 && room.length > 2.0 && room.height > 2.0)) {
    throw DomainError("scene config: room must exceed 2 m in every direction");
  }
  if (pose && !pose->is_valid(1e-6)) throw DomainError("scene config: pose rotation is not orthonormal");
}

Pose random_room_pose(const RoomConfig& room, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double margin = 1.0;
  const Point3 center(-room.width / 2 + margin + unit(rng) * (room.width - 2 * margin),
                      -room.length / 2 + margin + unit(rng) * (room.length - 2 * margin),
                      1.0 + unit(rng) * std::min(1.0, room.height - 2.0));
  const double pi = std::numbers::pi;
  const double yaw = 2.0 * pi * unit(rng);
  const double pitch = (-20.0 + 30.0 * unit(rng)) * pi / 180.0;
  const double roll = (-5.0 + 10.0 * unit(rng)) * pi / 180.0;

  const Point3 forward(std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw),
                       std::sin(pitch));
  Point3 right = forward.cross(Point3::UnitZ()).normalized();
  Point3 down = forward.cross(right);
  const Point3 rolled_right = std::cos(roll) * right + std::sin(roll) * down;
  const Point3 rolled_down = forward.cross(rolled_right);

  Eigen::Matrix3d camera_to_world;
  camera_to_world.col(0) = rolled_right;
  camera_to_world.col(1) = rolled_down;
  camera_to_world.col(2) = forward;
  Pose pose;
  pose.rotation = camera_to_world.transpose();
  pose.translation = -(pose.rotation * center);
  return pose;
}

SyntheticScene generate_scene(const SceneConfig& config) {
  config.validate();
  const std::size_t n = config.n_points;
  const auto n_outliers =
      static_cast<std::size_t>(std::llround(config.outlier_ratio * static_cast<double>(n)));
  if (n - n_outliers < 6) {
    throw DomainError("generate_scene: only " + std::to_string(n - n_outliers) +
                      " inliers would remain, need at least 6");
  }

  std::uint64_t state = config.seed;
  std::mt19937_64 rng(splitmix64(state));
  const Pose pose = config.pose ? *config.pose : random_room_pose(config.room, splitmix64(state));
  const Pose camera_to_world = pose.inverse();
  const Point3 camera = camera_to_world.translation;
  const Box room = room_box(config.room);
  if (!room.contains(camera)) throw DomainError("generate_scene: camera is outside the room");
  const auto clutter = make_clutter(config.room, camera, rng);

  const auto& k = config.intrinsics;
  std::uniform_real_distribution<double> pick_u(0.0, k.width);
  std::uniform_real_distribution<double> pick_v(0.0, k.height);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticScene scene;
  scene.true_scale = config.depth_scale;
  scene.config = config;
  scene.config.pose = pose;
  scene.corrs.intrinsics = k;
  scene.corrs.gt_pose = pose;

  auto corrupt_depth = [&](double depth) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double noisy = depth * (1.0 + config.depth_noise_sigma * gauss(rng));
      const double est = config.depth_scale * noisy + config.depth_bias;
      if (est > 0.0) return est;
    }
    throw DomainError("generate_scene: depth corruption keeps producing non-positive depths");
  };

  std::vector<Pixel> exact_pixels;
  exact_pixels.reserve(n);
  std::vector<Point3> points;
  points.reserve(n);
  while (points.size() < n) {
    const Pixel px{pick_u(rng), pick_v(rng)};
    const Point3 dir_cam((px.u - k.cx) / k.fx, (px.v - k.cy) / k.fy, 1.0);
    const Point3 dir = camera_to_world.rotation * dir_cam;
    double t = ray_room_exit(camera, dir, room);
    for (const auto& b : clutter) t = std::min(t, ray_box_entry(camera, dir, b));
    if (!std::isfinite(t) || t <= 0.05) continue;
    exact_pixels.push_back(px);
    points.push_back(camera + t * dir);
    scene.true_depths.push_back(t);  // dir_cam has unit z, so t is the depth
  }

  std::vector<Pixel> pixels = exact_pixels;
  std::vector<double> est_depths(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (config.pixel_noise_px > 0.0) {
      pixels[i].u += config.pixel_noise_px * gauss(rng);
      pixels[i].v += config.pixel_noise_px * gauss(rng);
    }
    est_depths[i] = corrupt_depth(scene.true_depths[i]);
  }

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Index> outliers(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_outliers));
  std::sort(outliers.begin(), outliers.end());
  std::vector<bool> labels(n, true);
  for (Index i : outliers) labels[i] = false;

  const bool shuffle = config.outlier_mode == OutlierMode::kPixelShuffle && outliers.size() >= 2;
  if (shuffle) {
    // Sattolo's algorithm: a single cycle, so every outlier pixel moves.
    std::vector<Index> perm = outliers;
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(perm[i], perm[pick(rng)]);
    }
    std::vector<Pixel> moved_pixels = pixels;
    std::vector<double> moved_depths = est_depths;
    for (std::size_t m = 0; m < outliers.size(); ++m) {
      moved_pixels[outliers[m]] = pixels[perm[m]];
      moved_depths[outliers[m]] = est_depths[perm[m]];
    }
    pixels = std::move(moved_pixels);
    est_depths = std::move(moved_depths);
  } else {
    std::uniform_real_distribution<double> ux(room.lo.x(), room.hi.x());
    std::uniform_real_distribution<double> uy(room.lo.y(), room.hi.y());
    std::uniform_real_distribution<double> uz(room.lo.z(), room.hi.z());
    for (Index i : outliers) points[i] = Point3(ux(rng), uy(rng), uz(rng));
  }

  scene.corrs.items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    scene.corrs.items.push_back(make_correspondence(pixels[i], points[i], est_depths[i], k));
  }
  scene.corrs.gt_labels = std::move(labels);
  return scene;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  throw DomainError("unknown split '" + text + "'");
}

Dataset make_dataset(const DatasetConfig& config) {
  if (config.n_scenes < 1) throw DomainError("make_dataset: need at least one scene");
  if (!(config.scale_min > 0.0) || config.scale_max < config.scale_min) {
    throw DomainError("make_dataset: invalid scale range");
  }
  const auto n = config.n_scenes;
  const auto n_train = static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(n))));

  Dataset out;
  std::uint64_t state = config.seed;
  for (std::size_t i = 0; i < n; ++i) {
    ManifestEntry entry;
    entry.config = config.base;
    entry.config.pose.reset();
    std::uint64_t scene_state = splitmix64(state);
    entry.config.seed = scene_state;
    if (config.scale_max > config.scale_min) {
      std::mt19937_64 scale_rng(splitmix64(scene_state));
      entry.config.depth_scale =
          std::uniform_real_distribution<double>(config.scale_min, config.scale_max)(scale_rng);
    } else {
      entry.config.depth_scale = config.scale_min;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04zu", i);
    entry.name = name;
    entry.split = i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
    out.scenes.push_back(generate_scene(entry.config));
    out.manifest.push_back(std::move(entry));
  }
  return out;
}

std::vector<std::size_t> split_indices(const std::vector<ManifestEntry>& manifest, Split split) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (manifest[i].split == split) out.push_back(i);
  return out;
}

std::vector<std::size_t> evaluation_indices(const std::vector<ManifestEntry>& manifest,
                                            bool all_if_no_test) {
  auto out = split_indices(manifest, Split::kTest);
  if (out.empty() && all_if_no_test) {
    out.resize(manifest.size());
    std::iota(out.begin(), out.end(), std::size_t{0});
  }
  return out;
}

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& manifest) {
  out << "# name seed n_points depth_scale depth_bias depth_noise pixel_noise outlier_ratio "
         "outlier_mode split\n";
  for (const auto& e : manifest) {
    const auto& c = e.config;
    out << e.name << ' ' << c.seed << ' ' << c.n_points << ' ' << format_real(c.depth_scale) << ' '
        << format_real(c.depth_bias) << ' ' << format_real(c.depth_noise_sigma) << ' '
        << format_real(c.pixel_noise_px) << ' ' << format_real(c.outlier_ratio) << ' '
        << to_string(c.outlier_mode) << ' ' << to_string(e.split) << '\n';
  }
}

std::vector<ManifestEntry> read_manifest(std::istream& in) {
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    ManifestEntry e;
    std::string mode;
    std::string split;
    if (!(ss >> e.name >> e.config.seed >> e.config.n_points >> e.config.depth_scale >>
          e.config.depth_bias >> e.config.depth_noise_sigma >> e.config.pixel_noise_px >>
          e.config.outlier_ratio >> mode >> split)) {
      throw DomainError("manifest line " + std::to_string(line_no) + " is malformed");
    }
    e.config.outlier_mode = parse_outlier_mode(mode);
    e.split = parse_split(split);
    out.push_back(std::move(e));
  }
  return out;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
  std::filesystem::create_directories(dir / "scenes");
  for (std::size_t i = 0; i < dataset.scenes.size(); ++i) {
    save_correspondences(dir / "scenes" / (dataset.manifest[i].name + ".txt"),
                         dataset.scenes[i].corrs);
  }
  std::ofstream out(dir / "manifest.txt", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  write_manifest(out, dataset.manifest);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt", std::ios::binary);
  if (!in) throw std::runtime_error("no manifest.txt in " + dir.string());
  Dataset out;
  out.manifest = read_manifest(in);
  for (const auto& e : out.manifest) {
    SyntheticScene scene;
    scene.corrs = load_correspondences(dir / "scenes" / (e.name + ".txt"));
    scene.true_scale = e.config.depth_scale;
    scene.config = e.config;
    scene.config.pose = scene.corrs.gt_pose;
    out.scenes.push_back(std::move(scene));
  }
  return out;
}

}  // namespace angle_i2p
