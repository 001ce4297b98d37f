#pragma once

#include <optional>
#include <span>
#include <vector>

#include "angle_i2p/graph.hpp"
#include "angle_i2p/net/attention.hpp"
#include "angle_i2p/net/model.hpp"

namespace angle_i2p::net {

struct NetworkOptions {
  AttentionOptions attention;
  /// Multiply consistency into self-attention logits. Off reproduces the
  /// all-ones path exactly.
  bool reweight = true;
  bool cross_attention = true;
  /// Reweight cross attention with graph.theta_cross instead of ones.
  bool cross_theta = false;
};

/// One network input: features, its graph, and optional labels.
struct Sample {
  Tensor features;  // N x 24
  HierGraph graph;
  std::vector<bool> labels;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
};

struct EmbedCache {
  Tensor input;
  Tensor hidden;  // tanh activations
};

/// Linear(24 -> d), tanh, Linear(d -> d). Throws DomainError on width mismatch.
Tensor embed_initial(const Tensor& features, const Model& model, EmbedCache* cache = nullptr);

/// Per-node caches of one hierarchical forward pass.
struct NodeCache {
  struct Layer {
    AttentionCache local_self;
    AttentionCache global_self;
    AttentionCache local_cross;
    AttentionCache global_cross;
  };
  std::vector<Layer> layers;
};

struct HierarchicalOutput {
  Tensor f_asc;                        // N x d, local-branch features mean-aggregated
  std::vector<Tensor> local_features;  // per node, K x d
  std::vector<Tensor> global_features; // per node, K' x d
  std::vector<int> coverage;           // groups each correspondence appears in
};

/// Alternating (self, cross) attention over local and global groups.
/// Correspondences outside every local group keep their F_init row.
HierarchicalOutput hierarchical_forward(const Model& model, const HierGraph& graph,
                                        const Tensor& f_init, const NetworkOptions& options = {},
                                        std::vector<NodeCache>* caches = nullptr);

struct HeadCache {
  Tensor input;
  Tensor hidden;
};

/// Classifier pre-activations (N).
Eigen::VectorXd classify_logits(const Tensor& f_asc, const Model& model,
                                HeadCache* cache = nullptr);

double sigmoid(double x);

/// Scores in (0, 1).
std::vector<double> classify(const Tensor& f_asc, const Model& model);

/// Full forward pass features -> scores.
std::vector<double> predict(const Model& model, const Sample& sample,
                            const NetworkOptions& options = {});

struct FilterResult {
  CorrespondenceSet set;
  std::vector<Index> kept;
  bool empty = false;  // warning flag: nothing passed the threshold
};

/// Keeps correspondences with score >= tau in their original order.
FilterResult filter(const CorrespondenceSet& corrs, std::span<const double> scores, double tau);

enum class LossKind { kBce, kFocal };

/// Mean binary cross-entropy of probabilities, clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> scores, const std::vector<bool>& labels);

struct LossOptions {
  LossKind kind = LossKind::kBce;
  double focal_gamma = 2.0;
};

/// Mean per-correspondence loss computed from logits, and dLoss/dlogit.
double loss_from_logits(const Eigen::VectorXd& logits, const std::vector<bool>& labels,
                        const LossOptions& options, Eigen::VectorXd* d_logits = nullptr);

struct LossAndGrad {
  double loss = 0.0;
  Model grad;
};

/// Loss of one sample and its analytic gradient for every parameter.
/// Throws DomainError when the sample carries no labels.
LossAndGrad loss_and_grad(const Model& model, const Sample& sample,
                          const LossOptions& loss = {}, const NetworkOptions& options = {});

/// Mean over a batch; gradients are accumulated in batch order.
LossAndGrad loss_and_grad(const Model& model, std::span<const Sample> batch,
                          const LossOptions& loss = {}, const NetworkOptions& options = {});

}  // namespace angle_i2p::net
