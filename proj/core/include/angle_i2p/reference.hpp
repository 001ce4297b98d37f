#pragma once

// Slow scalar re-implementations used as oracles by the test suites and the
// `selftest` command. Nothing here shares code with the production paths.

#include <functional>
#include <span>
#include <vector>

#include "angle_i2p/geometry.hpp"
#include "angle_i2p/net/model.hpp"
#include "angle_i2p/types.hpp"

namespace angle_i2p::reference {

/// Pairwise consistency over a group with element-by-element loops; centering
/// over the whole set.
Matrix consistency_matrix(const CorrespondenceSet& corrs, std::span<const Index> group,
                          const ConsistencyOptions& options);

/// K nearest candidates per query via a full sort on (distance, index).
std::vector<std::vector<Index>> knn(std::span<const Point3> queries,
                                    std::span<const Point3> candidates, std::size_t k);

/// Farthest-point sampling that recomputes every min-distance from scratch.
std::vector<Index> farthest_point_sampling(std::span<const Point3> points, std::size_t count,
                                           Index start);

/// Centroid-nearest index by direct scan.
Index centroid_nearest(std::span<const Point3> points);

/// Multi-head reweighted attention with explicit loops.
net::Tensor attention(const net::Tensor& fq, const net::Tensor& fkv, const net::Tensor* theta,
                      const net::AttentionLayer& layer, int heads);

/// Embedding block with explicit loops.
net::Tensor embed(const net::Tensor& features, const net::Model& model);

/// Rotation angle between two rotation matrices via unit quaternions, degrees.
double quaternion_rotation_error(const Eigen::Matrix3d& r_est, const Eigen::Matrix3d& r_gt);

/// Central finite differences of `loss` with respect to every parameter.
net::Model numeric_gradient(const net::Model& model,
                            const std::function<double(const net::Model&)>& loss,
                            double step = 1e-5);

}  // namespace angle_i2p::reference
