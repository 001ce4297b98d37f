#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "angle_i2p/types.hpp"

namespace angle_i2p::net {

/// Dense row-major-by-convention 2-D tensor: rows are items, columns features.
using Tensor = Matrix;

struct ModelConfig {
  int feature_width = 24;
  int d_model = 128;
  int heads = 4;
  int layers = 3;
  /// Width of the classifier's hidden layer; 0 means d_model / 2.
  int head_hidden = 0;

  int head_dim() const { return d_model / heads; }
  int hidden_width() const { return head_hidden > 0 ? head_hidden : d_model / 2; }
  void validate() const;
};

/// y = x Wᵀ + b with W stored out x in and b stored 1 x out.
struct Linear {
  Tensor weight;
  Tensor bias;

  Tensor forward(const Tensor& x) const;
  int in_features() const { return static_cast<int>(weight.cols()); }
  int out_features() const { return static_cast<int>(weight.rows()); }
};

struct AttentionLayer {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
};

struct Block {
  AttentionLayer self_attn;
  AttentionLayer cross_attn;
};

/// Embedding (24 -> d -> d), L blocks of (self, cross) attention, and a
/// classifier d -> hidden -> 1.
struct Model {
  ModelConfig config;
  Linear embed_in;
  Linear embed_out;
  std::vector<Block> blocks;
  Linear head_hidden;
  Linear head_out;

  /// Weights uniform in ±sqrt(6 / (fan_in + fan_out)), biases zero.
  static Model create(const ModelConfig& config, std::uint64_t seed);

  /// Same shapes, every entry zero. Used as the gradient accumulator.
  Model zeros_like() const;

  template <class F>
  void for_each(F&& visit) {
    for_each_impl(*this, visit);
  }
  template <class F>
  void for_each(F&& visit) const {
    for_each_impl(*this, visit);
  }

  std::size_t parameter_count() const;
  bool all_finite() const;

 private:
  template <class Self, class F>
  static void for_each_impl(Self& self, F& visit) {
    auto linear = [&](const std::string& name, auto& lin) {
      visit(name + ".weight", lin.weight);
      visit(name + ".bias", lin.bias);
    };
    auto attention = [&](const std::string& name, auto& att) {
      linear(name + ".query", att.query);
      linear(name + ".key", att.key);
      linear(name + ".value", att.value);
      linear(name + ".output", att.output);
    };
    linear("embed_in", self.embed_in);
    linear("embed_out", self.embed_out);
    for (std::size_t l = 0; l < self.blocks.size(); ++l) {
      attention("block" + std::to_string(l) + ".self", self.blocks[l].self_attn);
      attention("block" + std::to_string(l) + ".cross", self.blocks[l].cross_attn);
    }
    linear("head_hidden", self.head_hidden);
    linear("head_out", self.head_out);
  }
};

/// target += scale * source, tensor by tensor. Shapes must match.
void accumulate(Model& target, const Model& source, double scale = 1.0);

/// Checkpoint: "AGNN1", hyperparameter block (u64 feature_width, d_model,
/// heads, layers, head_hidden, tensor count), then each tensor in declaration
/// order as u64 rows, u64 cols and row-major f64 values, little-endian.
void write_model(std::ostream& out, const Model& model);
Model read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace angle_i2p::net
