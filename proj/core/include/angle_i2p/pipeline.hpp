#pragma once

#include <cstdint>
#include <vector>

#include "angle_i2p/geometry.hpp"
#include "angle_i2p/graph.hpp"
#include "angle_i2p/net/network.hpp"

namespace angle_i2p {

/// Everything needed to turn a correspondence set into a network sample.
struct PipelineConfig {
  ConsistencyOptions consistency;
  ScaleRatioDirection scale_direction = ScaleRatioDirection::kReciprocal;
  bool scale_alignment = true;
  std::size_t num_nodes = 0;  // 0: ceil(N / 16)
  std::size_t k_local = 32;
  std::size_t k_global = 32;
  std::size_t num_keypoints = 100;
  int normal_k = kDefaultNormalNeighbors;
  bool cross_theta = false;
  std::uint64_t seed = 0;
};

struct PreparedSample {
  net::Sample sample;
  double scale_estimate = 1.0;
  double rescale = 1.0;
  std::size_t degenerate_normals = 0;
  double coverage = 0.0;  // fraction of correspondences inside some local group
};

/// Scale estimate, normals, initial features, nodes, keypoints and graphs.
/// Group sizes are clamped to what the set can supply. Needs N >= 4.
PreparedSample prepare_sample(const CorrespondenceSet& corrs, const PipelineConfig& config);

/// Row sums of the full-set consistency matrix without the diagonal: how many
/// other correspondences each one agrees with.
std::vector<double> consistency_votes(const CorrespondenceSet& corrs,
                                      const ConsistencyOptions& options);

/// Indices of the `keep` highest-voted correspondences (ties: lower index),
/// returned in ascending order.
std::vector<Index> top_voted(std::span<const double> votes, std::size_t keep);

}  // namespace angle_i2p
