#pragma once

#include <string>
#include <vector>

#include "angle_i2p/net/model.hpp"

namespace angle_i2p::net {

struct AttentionOptions {
  /// Replace θ·logit by -inf wherever θ < mask_threshold instead of scaling.
  bool mask_mode = false;
  double mask_threshold = 1e-6;
};

/// Intermediates kept by the forward pass for the backward pass.
struct AttentionCache {
  Tensor query_input;
  Tensor kv_input;
  Tensor q, k, v;
  Tensor theta;                // empty when no reweighting was applied
  std::vector<Tensor> probs;   // one softmax matrix per head
  std::vector<Tensor> masked;  // per head, 1 where the logit was masked
  Tensor concat;               // heads' A·V side by side
};

/// Multi-head attention with consistency reweighting. For each head,
/// A = softmax_rows(Θ ⊙ QKᵀ/√d_h) and the heads' A·V are concatenated and
/// passed through the output projection. `theta == nullptr` is plain
/// attention. θ = 0 zeroes a logit; it does not mask it unless mask_mode is
/// set. Throws std::runtime_error naming `label` on a non-finite value.
Tensor reweighted_attention(const Tensor& fq, const Tensor& fkv, const Tensor* theta,
                            const AttentionLayer& layer, int heads,
                            const AttentionOptions& options = {}, AttentionCache* cache = nullptr,
                            const std::string& label = "attention");

/// Accumulates parameter gradients into `grad` and adds the input gradients
/// into d_fq / d_fkv (which must already be sized).
void reweighted_attention_backward(const Tensor& d_out, const AttentionLayer& layer, int heads,
                                   const AttentionCache& cache, AttentionLayer& grad,
                                   Tensor& d_fq, Tensor& d_fkv);

/// Row-wise softmax; rows that are entirely -inf come out uniform.
Tensor softmax_rows(const Tensor& logits);

}  // namespace angle_i2p::net
