#include "angle_i2p/pipeline.hpp"

#include <algorithm>
#include <numeric>

namespace angle_i2p {

PreparedSample prepare_sample(const CorrespondenceSet& corrs, const PipelineConfig& config) {
  const std::size_t n = corrs.size();
  if (n < 4) throw DomainError("prepare_sample: need at least 4 correspondences");
  corrs.validate();

  PreparedSample out;
  out.scale_estimate = estimate_scale(corrs);
  out.rescale = config.scale_alignment ? rescale_factor(out.scale_estimate, config.scale_direction) : 1.0;

  const int normal_k = std::min<int>(config.normal_k, static_cast<int>(n) - 1);
  const auto est = est_points_of(corrs);
  const auto pts = points_of(corrs);
  const auto normals_est = estimate_normals(est, normal_k);
  const auto normals_pts = estimate_normals(pts, normal_k);
  out.degenerate_normals =
      static_cast<std::size_t>(std::count(normals_est.degenerate.begin(), normals_est.degenerate.end(), true) +
                               std::count(normals_pts.degenerate.begin(), normals_pts.degenerate.end(), true));
  out.sample.features = initial_features(corrs, out.rescale, normals_est.normals, normals_pts.normals);

  const std::size_t v = std::min(n, config.num_nodes > 0 ? config.num_nodes : (n + 15) / 16);
  GraphOptions graph_options;
  graph_options.k_local = std::min(config.k_local, n);
  graph_options.num_keypoints = std::min(config.num_keypoints, n);
  graph_options.k_global = std::min(config.k_global, graph_options.num_keypoints);
  graph_options.consistency = config.consistency;
  graph_options.cross_theta = config.cross_theta;
  const auto nodes = sample_nodes(corrs, v, config.seed);
  const auto keypoints = select_global_keypoints(corrs, graph_options.num_keypoints, config.seed);
  out.sample.graph = build_graphs(corrs, nodes, keypoints, graph_options);
  out.coverage = local_coverage(out.sample.graph, n);
  if (corrs.gt_labels) out.sample.labels = *corrs.gt_labels;
  return out;
}

std::vector<double> consistency_votes(const CorrespondenceSet& corrs,
                                      const ConsistencyOptions& options) {
  std::vector<Index> all(corrs.size());
  std::iota(all.begin(), all.end(), Index{0});
  const auto m = consistency_matrix(corrs, all, options);
  std::vector<double> votes(corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    votes[i] = m.theta.row(static_cast<Eigen::Index>(i)).sum() - 1.0;
  }
  return votes;
}

std::vector<Index> top_voted(std::span<const double> votes, std::size_t keep) {
  keep = std::min(keep, votes.size());
  std::vector<Index> order(votes.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return votes[a] > votes[b]; });
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace angle_i2p
