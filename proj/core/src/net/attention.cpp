#include "angle_i2p/net/attention.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace angle_i2p::net {
namespace {

void accumulate_linear_grad(const Tensor& input, const Tensor& d_output, Linear& grad) {
  grad.weight.noalias() += d_output.transpose() * input;
  grad.bias += d_output.colwise().sum();
}

void require_finite(const Tensor& t, const std::string& label, const char* stage) {
  if (!t.allFinite()) {
    throw std::runtime_error("non-finite value in " + label + " (" + stage + ")");
  }
}

}  // namespace

Tensor softmax_rows(const Tensor& logits) {
  Tensor out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double max = logits.row(r).maxCoeff();
    if (max == -std::numeric_limits<double>::infinity()) {
      out.row(r).setConstant(1.0 / static_cast<double>(logits.cols()));
      continue;
    }
    double sum = 0.0;
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double e = std::exp(logits(r, c) - max);
      out(r, c) = e;
      sum += e;
    }
    out.row(r) /= sum;
  }
  return out;
}

Tensor reweighted_attention(const Tensor& fq, const Tensor& fkv, const Tensor* theta,
                            const AttentionLayer& layer, int heads,
                            const AttentionOptions& options, AttentionCache* cache,
                            const std::string& label) {
  const Eigen::Index d = layer.query.weight.rows();
  if (fq.cols() != layer.query.weight.cols() || fkv.cols() != layer.key.weight.cols()) {
    throw DomainError(label + ": feature width does not match the projections");
  }
  if (heads <= 0 || d % heads != 0) throw DomainError(label + ": bad head count");
  if (theta && (theta->rows() != fq.rows() || theta->cols() != fkv.rows())) {
    throw DomainError(label + ": theta shape does not match query/key counts");
  }
  const Eigen::Index dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = layer.query.forward(fq);
  Tensor k = layer.key.forward(fkv);
  Tensor v = layer.value.forward(fkv);
  Tensor concat(fq.rows(), d);
  if (cache) {
    cache->probs.clear();
    cache->masked.clear();
  }
  for (int h = 0; h < heads; ++h) {
    const auto cols = Eigen::seqN(h * dh, dh);
    Tensor logits = (q(Eigen::all, cols) * k(Eigen::all, cols).transpose()) * inv_sqrt;
    Tensor masked;
    if (theta) {
      if (options.mask_mode) {
        masked = Tensor::Zero(logits.rows(), logits.cols());
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
          for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            if ((*theta)(r, c) < options.mask_threshold) {
              logits(r, c) = -std::numeric_limits<double>::infinity();
              masked(r, c) = 1.0;
            } else {
              logits(r, c) *= (*theta)(r, c);
            }
          }
        }
      } else {
        logits.array() *= theta->array();
      }
    }
    Tensor probs = softmax_rows(logits);
    require_finite(probs, label, "softmax");
    concat(Eigen::all, cols).noalias() = probs * v(Eigen::all, cols);
    if (cache) {
      cache->probs.push_back(std::move(probs));
      cache->masked.push_back(std::move(masked));
    }
  }
  Tensor out = layer.output.forward(concat);
  require_finite(out, label, "output");
  if (cache) {
    cache->query_input = fq;
    cache->kv_input = fkv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->theta = theta ? *theta : Tensor();
    cache->concat = std::move(concat);
  }
  return out;
}

void reweighted_attention_backward(const Tensor& d_out, const AttentionLayer& layer, int heads,
                                   const AttentionCache& cache, AttentionLayer& grad,
                                   Tensor& d_fq, Tensor& d_fkv) {
  const Eigen::Index d = layer.query.weight.rows();
  const Eigen::Index dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool reweighted = cache.theta.size() > 0;

  accumulate_linear_grad(cache.concat, d_out, grad.output);
  const Tensor d_concat = d_out * layer.output.weight;

  Tensor d_q(cache.q.rows(), d);
  Tensor d_k(cache.k.rows(), d);
  Tensor d_v(cache.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const auto cols = Eigen::seqN(h * dh, dh);
    const Tensor& probs = cache.probs[static_cast<std::size_t>(h)];
    const Tensor d_head = d_concat(Eigen::all, cols);
    d_v(Eigen::all, cols).noalias() = probs.transpose() * d_head;
    const Tensor d_probs = d_head * cache.v(Eigen::all, cols).transpose();
    // Softmax Jacobian, row by row: dz = p ⊙ (dp - <dp, p>).
    const Eigen::VectorXd row_dot = (d_probs.array() * probs.array()).rowwise().sum();
    Tensor d_logits = probs.array() * (d_probs.array().colwise() - row_dot.array());
    if (reweighted) {
      d_logits.array() *= cache.theta.array();
      const Tensor& masked = cache.masked[static_cast<std::size_t>(h)];
      if (masked.size() > 0) d_logits.array() *= (1.0 - masked.array());
    }
    d_logits *= inv_sqrt;
    d_q(Eigen::all, cols).noalias() = d_logits * cache.k(Eigen::all, cols);
    d_k(Eigen::all, cols).noalias() = d_logits.transpose() * cache.q(Eigen::all, cols);
  }
  accumulate_linear_grad(cache.query_input, d_q, grad.query);
  accumulate_linear_grad(cache.kv_input, d_k, grad.key);
  accumulate_linear_grad(cache.kv_input, d_v, grad.value);
  d_fq.noalias() += d_q * layer.query.weight;
  d_fkv.noalias() += d_k * layer.key.weight;
  d_fkv.noalias() += d_v * layer.value.weight;
}

}  // namespace angle_i2p::net
