#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "angle_i2p/types.hpp"

namespace angle_i2p {

enum class OutlierMode {
  kUniformResample,  // point replaced by a uniform draw in the room's bounding box
  kPixelShuffle,     // pixels (with their depths) cyclically permuted among outliers
};

std::string to_string(OutlierMode mode);
OutlierMode parse_outlier_mode(const std::string& text);

/// Box-shaped room with a few floor-standing boxes as clutter.
struct RoomConfig {
  double width = 6.0;   // x extent, centered on 0
  double length = 5.0;  // y extent, centered on 0
  double height = 3.0;  // z from 0 (floor) up
  int clutter_boxes = 4;
};

CameraIntrinsics default_intrinsics();

struct SceneConfig {
  std::size_t n_points = 256;
  std::optional<Pose> pose;  // drawn from the seed when absent
  CameraIntrinsics intrinsics = default_intrinsics();
  double depth_scale = 1.0;        // est_depth = scale * depth * (1 + noise) + bias
  double depth_bias = 0.0;         // meters, one constant per scene
  double depth_noise_sigma = 0.0;  // relative, multiplicative Gaussian
  double pixel_noise_px = 0.0;     // Gaussian pixel noise on inliers
  double outlier_ratio = 0.0;
  OutlierMode outlier_mode = OutlierMode::kUniformResample;
  RoomConfig room;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticScene {
  CorrespondenceSet corrs;  // carries gt_pose and gt_labels
  double true_scale = 1.0;
  SceneConfig config;       // provenance, with the pose that was used
  std::vector<double> true_depths;
};

/// Ray-casts n_points uniformly drawn pixels into the room to get visible
/// structure, corrupts the depths, then replaces an exact
/// round(outlier_ratio * n) correspondences with outliers. Throws DomainError
/// when fewer than 6 inliers would remain.
SyntheticScene generate_scene(const SceneConfig& config);

/// Camera pose standing inside the room, roughly level, random heading.
Pose random_room_pose(const RoomConfig& room, std::uint64_t seed);

std::uint64_t splitmix64(std::uint64_t& state);

enum class Split { kTrain, kVal, kTest };
std::string to_string(Split split);
Split parse_split(const std::string& text);

struct DatasetConfig {
  SceneConfig base;
  std::size_t n_scenes = 1;
  std::uint64_t seed = 0;
  /// Per-scene depth scale drawn uniformly in [scale_min, scale_max]; when
  /// equal the base scale is replaced by that value.
  double scale_min = 1.0;
  double scale_max = 1.0;
};

struct ManifestEntry {
  std::string name;
  SceneConfig config;
  Split split = Split::kTrain;
};

struct Dataset {
  std::vector<SyntheticScene> scenes;
  std::vector<ManifestEntry> manifest;
};

/// Per-scene seeds come from splitmix64 of the master seed; the split is
/// 70/15/15 by scene index (rounded).
Dataset make_dataset(const DatasetConfig& config);

/// Indices of scenes used for evaluation: the test split, or every scene
/// when the test split is empty and `all_if_no_test` is set.
std::vector<std::size_t> evaluation_indices(const std::vector<ManifestEntry>& manifest,
                                            bool all_if_no_test = true);
std::vector<std::size_t> split_indices(const std::vector<ManifestEntry>& manifest, Split split);

/// One line per scene: name seed n_points depth_scale depth_bias depth_noise
/// pixel_noise outlier_ratio outlier_mode split.
void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& manifest);
std::vector<ManifestEntry> read_manifest(std::istream& in);

/// Writes scenes/<name>.txt and manifest.txt under `dir`.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
/// Reads the manifest and every scene file it lists.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace angle_i2p
