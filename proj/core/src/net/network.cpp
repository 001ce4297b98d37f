#include "angle_i2p/net/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace angle_i2p::net {
namespace {

Tensor gather_rows(const Tensor& source, std::span<const Index> rows) {
  Tensor out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = source.row(static_cast<Eigen::Index>(rows[r]));
  }
  return out;
}

void scatter_add_rows(Tensor& target, const Tensor& rows_values, std::span<const Index> rows) {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    target.row(static_cast<Eigen::Index>(rows[r])) += rows_values.row(static_cast<Eigen::Index>(r));
  }
}

void accumulate_linear_grad(const Tensor& input, const Tensor& d_output, Linear& grad) {
  grad.weight.noalias() += d_output.transpose() * input;
  grad.bias += d_output.colwise().sum();
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void check_graph(const HierGraph& graph, std::size_t n) {
  const std::size_t v = graph.num_nodes();
  if (graph.global_groups.size() != v || graph.theta_local.size() != v ||
      graph.theta_global.size() != v) {
    throw DomainError("hierarchical_forward: graph arrays disagree on node count");
  }
  for (std::size_t j = 0; j < v; ++j) {
    for (Index idx : graph.local_groups[j])
      if (idx >= n) throw DomainError("hierarchical_forward: local index out of range");
    for (Index slot : graph.global_groups[j])
      if (slot >= graph.global_keypoints.size())
        throw DomainError("hierarchical_forward: global slot out of range");
  }
  for (Index idx : graph.global_keypoints)
    if (idx >= n) throw DomainError("hierarchical_forward: keypoint index out of range");
}

}  // namespace

Tensor embed_initial(const Tensor& features, const Model& model, EmbedCache* cache) {
  if (features.cols() != model.embed_in.weight.cols()) {
    throw DomainError("embed_initial: expected feature width " +
                      std::to_string(model.embed_in.weight.cols()) + ", got " +
                      std::to_string(features.cols()));
  }
  Tensor hidden = model.embed_in.forward(features).array().tanh().matrix();
  Tensor out = model.embed_out.forward(hidden);
  if (cache) {
    cache->input = features;
    cache->hidden = std::move(hidden);
  }
  return out;
}

HierarchicalOutput hierarchical_forward(const Model& model, const HierGraph& graph,
                                        const Tensor& f_init, const NetworkOptions& options,
                                        std::vector<NodeCache>* caches) {
  const auto n = static_cast<std::size_t>(f_init.rows());
  const int heads = model.config.heads;
  const std::size_t layers = model.blocks.size();
  if (f_init.cols() != model.config.d_model) {
    throw DomainError("hierarchical_forward: feature width does not match d_model");
  }
  check_graph(graph, n);
  const bool cross_weighted = options.cross_attention && options.cross_theta && options.reweight;
  if (cross_weighted && graph.theta_cross.size() != graph.num_nodes()) {
    throw DomainError("hierarchical_forward: cross theta requested but graph has none");
  }

  HierarchicalOutput out;
  out.f_asc = Tensor::Zero(f_init.rows(), f_init.cols());
  out.coverage.assign(n, 0);
  if (caches) caches->assign(graph.num_nodes(), NodeCache{std::vector<NodeCache::Layer>(layers)});

  for (std::size_t j = 0; j < graph.num_nodes(); ++j) {
    const auto& local_idx = graph.local_groups[j];
    const auto global_idx = graph.global_members(j);
    Tensor local = gather_rows(f_init, local_idx);
    Tensor global = gather_rows(f_init, global_idx);
    const Tensor* theta_local = options.reweight ? &graph.theta_local[j] : nullptr;
    const Tensor* theta_global = options.reweight ? &graph.theta_global[j] : nullptr;
    Tensor cross_t;
    if (cross_weighted) cross_t = graph.theta_cross[j].transpose();
    const Tensor* theta_lg = cross_weighted ? &graph.theta_cross[j] : nullptr;
    const Tensor* theta_gl = cross_weighted ? &cross_t : nullptr;

    for (std::size_t l = 0; l < layers; ++l) {
      const auto& block = model.blocks[l];
      NodeCache::Layer* c = caches ? &(*caches)[j].layers[l] : nullptr;
      const std::string tag = "block " + std::to_string(l) + " node " + std::to_string(j);
      Tensor local_next = local + reweighted_attention(local, local, theta_local, block.self_attn,
                                                       heads, options.attention,
                                                       c ? &c->local_self : nullptr,
                                                       tag + " local self-attention");
      Tensor global_next = global + reweighted_attention(global, global, theta_global,
                                                         block.self_attn, heads, options.attention,
                                                         c ? &c->global_self : nullptr,
                                                         tag + " global self-attention");
      if (options.cross_attention) {
        Tensor local_cross =
            local_next + reweighted_attention(local_next, global_next, theta_lg, block.cross_attn,
                                              heads, options.attention,
                                              c ? &c->local_cross : nullptr,
                                              tag + " local cross-attention");
        Tensor global_cross =
            global_next + reweighted_attention(global_next, local_next, theta_gl,
                                               block.cross_attn, heads, options.attention,
                                               c ? &c->global_cross : nullptr,
                                               tag + " global cross-attention");
        local_next = std::move(local_cross);
        global_next = std::move(global_cross);
      }
      local = std::move(local_next);
      global = std::move(global_next);
    }
    scatter_add_rows(out.f_asc, local, local_idx);
    for (Index idx : local_idx) ++out.coverage[idx];
    out.local_features.push_back(std::move(local));
    out.global_features.push_back(std::move(global));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    if (out.coverage[i] > 0) {
      out.f_asc.row(row) /= static_cast<double>(out.coverage[i]);
    } else {
      out.f_asc.row(row) = f_init.row(row);
    }
  }
  return out;
}

Eigen::VectorXd classify_logits(const Tensor& f_asc, const Model& model, HeadCache* cache) {
  if (!f_asc.allFinite()) throw DomainError("classify: non-finite input features");
  Tensor hidden = model.head_hidden.forward(f_asc).array().tanh().matrix();
  Eigen::VectorXd logits = model.head_out.forward(hidden).col(0);
  if (cache) {
    cache->input = f_asc;
    cache->hidden = std::move(hidden);
  }
  return logits;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> classify(const Tensor& f_asc, const Model& model) {
  const Eigen::VectorXd logits = classify_logits(f_asc, model);
  std::vector<double> scores(static_cast<std::size_t>(logits.size()));
  for (Eigen::Index i = 0; i < logits.size(); ++i) scores[static_cast<std::size_t>(i)] = sigmoid(logits(i));
  return scores;
}

std::vector<double> predict(const Model& model, const Sample& sample,
                            const NetworkOptions& options) {
  const Tensor f_init = embed_initial(sample.features, model);
  const auto hier = hierarchical_forward(model, sample.graph, f_init, options);
  return classify(hier.f_asc, model);
}

FilterResult filter(const CorrespondenceSet& corrs, std::span<const double> scores, double tau) {
  if (scores.size() != corrs.size()) {
    throw DomainError("filter: " + std::to_string(scores.size()) + " scores for " +
                      std::to_string(corrs.size()) + " correspondences");
  }
  FilterResult out;
  out.set.intrinsics = corrs.intrinsics;
  out.set.gt_pose = corrs.gt_pose;
  std::vector<bool> labels;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (scores[i] >= tau) {
      out.kept.push_back(i);
      out.set.items.push_back(corrs.items[i]);
      if (corrs.gt_labels) labels.push_back((*corrs.gt_labels)[i]);
    }
  }
  if (corrs.gt_labels) out.set.gt_labels = std::move(labels);
  out.empty = out.kept.empty();
  return out;
}

double bce_loss(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw DomainError("bce_loss: scores and labels must be non-empty and aligned");
  }
  constexpr double kClamp = 1e-7;
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], kClamp, 1.0 - kClamp);
    sum += labels[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(scores.size());
}

double loss_from_logits(const Eigen::VectorXd& logits, const std::vector<bool>& labels,
                        const LossOptions& options, Eigen::VectorXd* d_logits) {
  const auto n = static_cast<std::size_t>(logits.size());
  if (labels.size() != n || n == 0) {
    throw DomainError("loss: labels missing or misaligned with scores");
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (d_logits) d_logits->resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    // Work with the logit of the true class so both labels share one formula.
    const double sign = labels[i] ? 1.0 : -1.0;
    const double z = sign * logits(r);
    const double log_pt = -softplus(-z);
    const double pt = sigmoid(z);
    double loss = 0.0;
    double d_z = 0.0;
    if (options.kind == LossKind::kBce) {
      loss = -log_pt;
      d_z = pt - 1.0;
    } else {
      const double g = options.focal_gamma;
      const double q = 1.0 - pt;
      loss = -std::pow(q, g) * log_pt;
      d_z = g * pt * std::pow(q, g) * log_pt - std::pow(q, g + 1.0);
    }
    sum += loss;
    if (d_logits) (*d_logits)(r) = sign * d_z * inv_n;
  }
  return sum * inv_n;
}

LossAndGrad loss_and_grad(const Model& model, const Sample& sample, const LossOptions& loss,
                          const NetworkOptions& options) {
  if (sample.labels.size() != sample.size()) {
    throw DomainError("loss_and_grad: sample has no labels (or they are misaligned)");
  }
  const int heads = model.config.heads;
  EmbedCache embed_cache;
  const Tensor f_init = embed_initial(sample.features, model, &embed_cache);
  std::vector<NodeCache> caches;
  const auto hier = hierarchical_forward(model, sample.graph, f_init, options, &caches);
  HeadCache head_cache;
  const Eigen::VectorXd logits = classify_logits(hier.f_asc, model, &head_cache);

  LossAndGrad out;
  out.grad = model.zeros_like();
  Eigen::VectorXd d_logits;
  out.loss = loss_from_logits(logits, sample.labels, loss, &d_logits);
  if (!std::isfinite(out.loss)) throw std::runtime_error("loss_and_grad: loss is not finite");

  // Classifier.
  const Tensor d_z = d_logits;
  accumulate_linear_grad(head_cache.hidden, d_z, out.grad.head_out);
  const Tensor d_hidden = (d_z * model.head_out.weight).array() *
                          (1.0 - head_cache.hidden.array().square());
  accumulate_linear_grad(head_cache.input, d_hidden, out.grad.head_hidden);
  const Tensor d_fasc = d_hidden * model.head_hidden.weight;

  // Aggregation and attention blocks.
  Tensor d_finit = Tensor::Zero(f_init.rows(), f_init.cols());
  for (std::size_t i = 0; i < hier.coverage.size(); ++i) {
    if (hier.coverage[i] == 0) d_finit.row(static_cast<Eigen::Index>(i)) += d_fasc.row(static_cast<Eigen::Index>(i));
  }
  const auto& graph = sample.graph;
  for (std::size_t j = 0; j < graph.num_nodes(); ++j) {
    const auto& local_idx = graph.local_groups[j];
    const auto global_idx = graph.global_members(j);
    Tensor d_local(static_cast<Eigen::Index>(local_idx.size()), f_init.cols());
    for (std::size_t s = 0; s < local_idx.size(); ++s) {
      d_local.row(static_cast<Eigen::Index>(s)) =
          d_fasc.row(static_cast<Eigen::Index>(local_idx[s])) /
          static_cast<double>(hier.coverage[local_idx[s]]);
    }
    Tensor d_global = Tensor::Zero(static_cast<Eigen::Index>(global_idx.size()), f_init.cols());
    for (std::size_t l = model.blocks.size(); l-- > 0;) {
      const auto& block = model.blocks[l];
      auto& grad_block = out.grad.blocks[l];
      const auto& c = caches[j].layers[l];
      if (options.cross_attention) {
        Tensor d_local_in = d_local;
        Tensor d_global_in = d_global;
        reweighted_attention_backward(d_local, block.cross_attn, heads, c.local_cross,
                                      grad_block.cross_attn, d_local_in, d_global_in);
        reweighted_attention_backward(d_global, block.cross_attn, heads, c.global_cross,
                                      grad_block.cross_attn, d_global_in, d_local_in);
        d_local = std::move(d_local_in);
        d_global = std::move(d_global_in);
      }
      Tensor d_local_in = d_local;
      reweighted_attention_backward(d_local, block.self_attn, heads, c.local_self,
                                    grad_block.self_attn, d_local_in, d_local_in);
      Tensor d_global_in = d_global;
      reweighted_attention_backward(d_global, block.self_attn, heads, c.global_self,
                                    grad_block.self_attn, d_global_in, d_global_in);
      d_local = std::move(d_local_in);
      d_global = std::move(d_global_in);
    }
    scatter_add_rows(d_finit, d_local, local_idx);
    scatter_add_rows(d_finit, d_global, global_idx);
  }

  // Embedding.
  accumulate_linear_grad(embed_cache.hidden, d_finit, out.grad.embed_out);
  const Tensor d_embed_hidden = (d_finit * model.embed_out.weight).array() *
                                (1.0 - embed_cache.hidden.array().square());
  accumulate_linear_grad(embed_cache.input, d_embed_hidden, out.grad.embed_in);
  return out;
}

LossAndGrad loss_and_grad(const Model& model, std::span<const Sample> batch,
                          const LossOptions& loss, const NetworkOptions& options) {
  if (batch.empty()) throw DomainError("loss_and_grad: empty batch");
  LossAndGrad total;
  total.grad = model.zeros_like();
  for (const auto& sample : batch) {
    auto one = loss_and_grad(model, sample, loss, options);
    total.loss += one.loss;
    accumulate(total.grad, one.grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  total.loss *= inv;
  total.grad.for_each([&](const std::string&, Tensor& t) { t *= inv; });
  return total;
}

}  // namespace angle_i2p::net
