#include "angle_i2p/graph.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "binary_io.hpp"

namespace angle_i2p {
namespace {

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

Index pick_start(std::span<const Point3> points, std::uint64_t seed, FpsStart start) {
  if (start == FpsStart::kSeeded) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
    return pick(rng);
  }
  return centroid_nearest(points);
}

}  // namespace

Index centroid_nearest(std::span<const Point3> points) {
  if (points.empty()) throw DomainError("centroid_nearest: empty point list");
  const auto centered = centroid_and_center(points);
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < points.size(); ++i) {
    const double d = squared_distance(points[i], centered.centroid);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<Index> farthest_point_sampling(std::span<const Point3> points, std::size_t count,
                                           Index start) {
  const std::size_t n = points.size();
  if (count > n) {
    throw DomainError("farthest_point_sampling: requested " + std::to_string(count) +
                      " samples from " + std::to_string(n) + " points");
  }
  std::vector<Index> selected;
  if (count == 0) return selected;
  if (start >= n) throw DomainError("farthest_point_sampling: start index out of range");
  selected.reserve(count);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  Index current = start;
  for (std::size_t s = 0; s < count; ++s) {
    selected.push_back(current);
    taken[current] = true;
    Index next = n;
    double next_d = -1.0;
    for (Index i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_d[i] = std::min(min_d[i], squared_distance(points[i], points[current]));
      if (min_d[i] > next_d) {
        next_d = min_d[i];
        next = i;
      }
    }
    current = next;
  }
  return selected;
}

NodeSet sample_nodes(const CorrespondenceSet& corrs, std::size_t num_nodes, std::uint64_t seed,
                     FpsStart start) {
  if (num_nodes == 0) throw DomainError("sample_nodes: need at least one node");
  if (num_nodes > corrs.size()) {
    throw DomainError("sample_nodes: " + std::to_string(num_nodes) + " nodes requested from " +
                      std::to_string(corrs.size()) + " correspondences");
  }
  const auto points = points_of(corrs);
  NodeSet out;
  out.indices = farthest_point_sampling(points, num_nodes, pick_start(points, seed, start));
  for (Index idx : out.indices) out.nodes.push_back(points[idx]);
  return out;
}

std::vector<std::vector<Index>> knn_assign(std::span<const Point3> queries,
                                           std::span<const Point3> candidates, std::size_t k) {
  if (k == 0) throw DomainError("knn_assign: k must be positive");
  if (k > candidates.size()) {
    throw DomainError("knn_assign: k = " + std::to_string(k) + " exceeds " +
                      std::to_string(candidates.size()) + " candidates");
  }
  std::vector<std::vector<Index>> groups;
  groups.reserve(queries.size());
  std::vector<Index> order(candidates.size());
  std::vector<double> dist(candidates.size());
  for (const auto& q : queries) {
    for (Index i = 0; i < candidates.size(); ++i) dist[i] = squared_distance(q, candidates[i]);
    std::iota(order.begin(), order.end(), Index{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](Index a, Index b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
    groups.emplace_back(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return groups;
}

std::vector<std::vector<Index>> knn_assign(const NodeSet& nodes, const CorrespondenceSet& corrs,
                                           std::size_t k) {
  const auto points = points_of(corrs);
  return knn_assign(nodes.nodes, points, k);
}

std::vector<Index> select_global_keypoints(const CorrespondenceSet& corrs, std::size_t count,
                                           std::uint64_t seed, FpsStart start) {
  if (count > corrs.size()) {
    throw DomainError("select_global_keypoints: " + std::to_string(count) +
                      " keypoints requested from " + std::to_string(corrs.size()));
  }
  if (count == 0) return {};
  const auto points = points_of(corrs);
  return farthest_point_sampling(points, count, pick_start(points, seed, start));
}

std::vector<Index> select_global_keypoints(std::span<const double> saliency, std::size_t count) {
  if (count > saliency.size()) {
    throw DomainError("select_global_keypoints: more keypoints than scores");
  }
  std::vector<Index> order(saliency.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return saliency[a] > saliency[b]; });
  order.resize(count);
  return order;
}

std::vector<Index> HierGraph::global_members(std::size_t node) const {
  std::vector<Index> out;
  out.reserve(global_groups[node].size());
  for (Index slot : global_groups[node]) out.push_back(global_keypoints[slot]);
  return out;
}

HierGraph build_graphs(const CorrespondenceSet& corrs, const NodeSet& nodes,
                       std::span<const Index> global_keypoints, const GraphOptions& options) {
  if (nodes.size() == 0) throw DomainError("build_graphs: empty node set");
  if (options.k_global > global_keypoints.size()) {
    throw DomainError("build_graphs: k_global = " + std::to_string(options.k_global) +
                      " exceeds keypoint count " + std::to_string(global_keypoints.size()));
  }
  for (Index idx : global_keypoints) {
    if (idx >= corrs.size()) throw DomainError("build_graphs: keypoint index out of range");
  }
  HierGraph graph;
  graph.node_indices = nodes.indices;
  graph.global_keypoints.assign(global_keypoints.begin(), global_keypoints.end());
  graph.local_groups = knn_assign(nodes, corrs, options.k_local);

  const auto points = points_of(corrs);
  std::vector<Point3> keypoint_xyz;
  keypoint_xyz.reserve(global_keypoints.size());
  for (Index idx : global_keypoints) keypoint_xyz.push_back(points[idx]);
  graph.global_groups = knn_assign(nodes.nodes, keypoint_xyz, options.k_global);

  const auto centered = center_correspondences(corrs);
  const std::size_t v = nodes.size();
  graph.theta_local.reserve(v);
  graph.theta_global.reserve(v);
  for (std::size_t j = 0; j < v; ++j) {
    graph.theta_local.push_back(
        consistency_matrix(corrs, centered, graph.local_groups[j], options.consistency).theta);
    const auto members = graph.global_members(j);
    graph.theta_global.push_back(
        consistency_matrix(corrs, centered, members, options.consistency).theta);
    if (options.cross_theta) {
      graph.theta_cross.push_back(cross_consistency_matrix(corrs, centered, graph.local_groups[j],
                                                           members, options.consistency)
                                      .theta);
    }
  }
  return graph;
}

HierGraph build_graphs(const CorrespondenceSet& corrs, const NodeSet& nodes,
                       const GraphOptions& options) {
  const auto keypoints = select_global_keypoints(corrs, options.num_keypoints, 0);
  return build_graphs(corrs, nodes, keypoints, options);
}

double local_coverage(const HierGraph& graph, std::size_t num_correspondences) {
  if (num_correspondences == 0) return 0.0;
  std::vector<bool> seen(num_correspondences, false);
  for (const auto& group : graph.local_groups)
    for (Index idx : group)
      if (idx < num_correspondences) seen[idx] = true;
  return static_cast<double>(std::count(seen.begin(), seen.end(), true)) /
         static_cast<double>(num_correspondences);
}

void write_graph(std::ostream& out, const HierGraph& graph) {
  using namespace detail;
  const std::uint64_t v = graph.num_nodes();
  const std::uint64_t k = v ? graph.local_groups.front().size() : 0;
  const std::uint64_t kg = v ? graph.global_groups.front().size() : 0;
  const std::uint64_t m = graph.global_keypoints.size();
  const std::uint64_t has_cross = graph.theta_cross.empty() ? 0 : 1;
  put_magic(out, "AGHG1");
  put_u64(out, v);
  put_u64(out, k);
  put_u64(out, kg);
  put_u64(out, m);
  put_u64(out, has_cross);
  for (Index idx : graph.node_indices) put_u64(out, idx);
  for (const auto& g : graph.local_groups)
    for (Index idx : g) put_u64(out, idx);
  for (const auto& g : graph.global_groups)
    for (Index idx : g) put_u64(out, idx);
  for (Index idx : graph.global_keypoints) put_u64(out, idx);
  for (const auto& t : graph.theta_local) put_matrix(out, t);
  for (const auto& t : graph.theta_global) put_matrix(out, t);
  for (const auto& t : graph.theta_cross) put_matrix(out, t);
}

HierGraph read_graph(std::istream& in) {
  using namespace detail;
  expect_magic(in, "AGHG1");
  const auto v = get_u64(in);
  const auto k = get_u64(in);
  const auto kg = get_u64(in);
  const auto m = get_u64(in);
  const auto has_cross = get_u64(in);
  constexpr std::uint64_t kLimit = 1ull << 24;
  if (v > kLimit || k > kLimit || kg > kLimit || m > kLimit || has_cross > 1) {
    throw DomainError("graph blob has implausible counts");
  }
  HierGraph graph;
  graph.node_indices.resize(v);
  for (auto& idx : graph.node_indices) idx = get_u64(in);
  graph.local_groups.assign(v, std::vector<Index>(k));
  for (auto& g : graph.local_groups)
    for (auto& idx : g) idx = get_u64(in);
  graph.global_groups.assign(v, std::vector<Index>(kg));
  for (auto& g : graph.global_groups)
    for (auto& idx : g) {
      idx = get_u64(in);
      if (idx >= m) throw DomainError("graph blob: global slot out of range");
    }
  graph.global_keypoints.resize(m);
  for (auto& idx : graph.global_keypoints) idx = get_u64(in);
  const auto ki = static_cast<Eigen::Index>(k);
  const auto kgi = static_cast<Eigen::Index>(kg);
  for (std::uint64_t j = 0; j < v; ++j) graph.theta_local.push_back(get_matrix(in, ki, ki));
  for (std::uint64_t j = 0; j < v; ++j) graph.theta_global.push_back(get_matrix(in, kgi, kgi));
  if (has_cross)
    for (std::uint64_t j = 0; j < v; ++j) graph.theta_cross.push_back(get_matrix(in, ki, kgi));
  return graph;
}

void save_graph(const std::filesystem::path& path, const HierGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_graph(out, graph);
}

HierGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_graph(in);
}

}  // namespace angle_i2p
