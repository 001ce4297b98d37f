#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "angle_i2p/geometry.hpp"
#include "angle_i2p/types.hpp"

namespace angle_i2p {

/// Where farthest-point sampling starts.
enum class FpsStart {
  kCentroidNearest,  // point nearest the centroid; the seed is unused
  kSeeded,           // uniformly drawn from the seed
};

struct NodeSet {
  std::vector<Index> indices;  // correspondence indices, in selection order
  std::vector<Point3> nodes;   // their point-cloud coordinates

  std::size_t size() const { return indices.size(); }
};

/// Farthest-point sampling; ties go to the lower index.
std::vector<Index> farthest_point_sampling(std::span<const Point3> points, std::size_t count,
                                           Index start);

/// Index of the point nearest the centroid (lowest index on ties).
Index centroid_nearest(std::span<const Point3> points);

NodeSet sample_nodes(const CorrespondenceSet& corrs, std::size_t num_nodes, std::uint64_t seed,
                     FpsStart start = FpsStart::kCentroidNearest);

/// For every query, the indices of its k nearest candidates by Euclidean
/// distance, nearest first, ties broken by lower index.
std::vector<std::vector<Index>> knn_assign(std::span<const Point3> queries,
                                           std::span<const Point3> candidates, std::size_t k);

std::vector<std::vector<Index>> knn_assign(const NodeSet& nodes, const CorrespondenceSet& corrs,
                                           std::size_t k);

/// Geometric stand-in for a learned keypoint detector: FPS over the point
/// cloud from the centroid-nearest point.
std::vector<Index> select_global_keypoints(const CorrespondenceSet& corrs, std::size_t count,
                                           std::uint64_t seed,
                                           FpsStart start = FpsStart::kCentroidNearest);

/// Top-`count` indices by an externally supplied saliency score, highest
/// first, ties by lower index.
std::vector<Index> select_global_keypoints(std::span<const double> saliency, std::size_t count);

struct GraphOptions {
  std::size_t k_local = 32;
  std::size_t k_global = 32;
  std::size_t num_keypoints = 100;
  ConsistencyOptions consistency;
  /// Compute local x global consistency for cross attention.
  bool cross_theta = false;
};

struct HierGraph {
  std::vector<Index> node_indices;
  std::vector<std::vector<Index>> local_groups;   // V x K correspondence indices
  std::vector<std::vector<Index>> global_groups;  // V x K' indices into global_keypoints
  std::vector<Index> global_keypoints;            // M correspondence indices
  std::vector<Matrix> theta_local;                // V of K x K
  std::vector<Matrix> theta_global;               // V of K' x K'
  std::vector<Matrix> theta_cross;                // V of K x K', empty unless requested

  std::size_t num_nodes() const { return local_groups.size(); }
  /// Correspondence indices of global group j.
  std::vector<Index> global_members(std::size_t node) const;
};

HierGraph build_graphs(const CorrespondenceSet& corrs, const NodeSet& nodes,
                       std::span<const Index> global_keypoints, const GraphOptions& options);

/// Convenience: samples the keypoints by FPS before building.
HierGraph build_graphs(const CorrespondenceSet& corrs, const NodeSet& nodes,
                       const GraphOptions& options);

/// Fraction of correspondence indices that appear in at least one local group.
double local_coverage(const HierGraph& graph, std::size_t num_correspondences);

/// Versioned little-endian blob: "AGHG1", u64 counts, u64 index arrays, f64
/// matrices row-major.
void write_graph(std::ostream& out, const HierGraph& graph);
HierGraph read_graph(std::istream& in);
void save_graph(const std::filesystem::path& path, const HierGraph& graph);
HierGraph load_graph(const std::filesystem::path& path);

}  // namespace angle_i2p
