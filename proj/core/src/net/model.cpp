#include "angle_i2p/net/model.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "../binary_io.hpp"

namespace angle_i2p::net {
namespace {

Linear make_linear(int in, int out, std::mt19937_64& rng) {
  Linear lin;
  lin.weight.resize(out, in);
  lin.bias = Tensor::Zero(1, out);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index r = 0; r < lin.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < lin.weight.cols(); ++c) lin.weight(r, c) = dist(rng);
  return lin;
}

AttentionLayer make_attention(int d, std::mt19937_64& rng) {
  AttentionLayer att;
  att.query = make_linear(d, d, rng);
  att.key = make_linear(d, d, rng);
  att.value = make_linear(d, d, rng);
  att.output = make_linear(d, d, rng);
  return att;
}

}  // namespace

void ModelConfig::validate() const {
  if (feature_width <= 0 || d_model <= 0 || heads <= 0 || layers < 0 || head_hidden < 0) {
    throw DomainError("model config: dimensions must be positive");
  }
  if (d_model % heads != 0) {
    throw DomainError("model config: d_model " + std::to_string(d_model) +
                      " is not divisible by heads " + std::to_string(heads));
  }
  if (hidden_width() <= 0) throw DomainError("model config: classifier hidden width is zero");
}

Tensor Linear::forward(const Tensor& x) const {
  Tensor y = x * weight.transpose();
  y.rowwise() += bias.row(0);
  return y;
}

Model Model::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  Model m;
  m.config = config;
  const int d = config.d_model;
  m.embed_in = make_linear(config.feature_width, d, rng);
  m.embed_out = make_linear(d, d, rng);
  for (int l = 0; l < config.layers; ++l) {
    Block b;
    b.self_attn = make_attention(d, rng);
    b.cross_attn = make_attention(d, rng);
    m.blocks.push_back(std::move(b));
  }
  m.head_hidden = make_linear(d, config.hidden_width(), rng);
  m.head_out = make_linear(config.hidden_width(), 1, rng);
  return m;
}

Model Model::zeros_like() const {
  Model z = *this;
  z.for_each([](const std::string&, Tensor& t) { t.setZero(); });
  return z;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Tensor& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

bool Model::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Tensor& t) { ok = ok && t.allFinite(); });
  return ok;
}

void accumulate(Model& target, const Model& source, double scale) {
  std::vector<const Tensor*> src;
  source.for_each([&](const std::string&, const Tensor& t) { src.push_back(&t); });
  std::size_t k = 0;
  target.for_each([&](const std::string& name, Tensor& t) {
    if (k >= src.size() || src[k]->rows() != t.rows() || src[k]->cols() != t.cols()) {
      throw DomainError("accumulate: model shapes differ at " + name);
    }
    t += scale * *src[k++];
  });
}

void write_model(std::ostream& out, const Model& model) {
  using namespace detail;
  put_magic(out, "AGNN1");
  const auto& c = model.config;
  put_u64(out, static_cast<std::uint64_t>(c.feature_width));
  put_u64(out, static_cast<std::uint64_t>(c.d_model));
  put_u64(out, static_cast<std::uint64_t>(c.heads));
  put_u64(out, static_cast<std::uint64_t>(c.layers));
  put_u64(out, static_cast<std::uint64_t>(c.head_hidden));
  std::uint64_t count = 0;
  model.for_each([&](const std::string&, const Tensor&) { ++count; });
  put_u64(out, count);
  model.for_each([&](const std::string&, const Tensor& t) {
    put_u64(out, static_cast<std::uint64_t>(t.rows()));
    put_u64(out, static_cast<std::uint64_t>(t.cols()));
    put_matrix(out, t);
  });
}

Model read_model(std::istream& in) {
  using namespace detail;
  expect_magic(in, "AGNN1");
  ModelConfig c;
  auto read_dim = [&](const char* name) {
    const auto v = get_u64(in);
    if (v > (1u << 20)) throw DomainError(std::string("checkpoint: implausible ") + name);
    return static_cast<int>(v);
  };
  c.feature_width = read_dim("feature_width");
  c.d_model = read_dim("d_model");
  c.heads = read_dim("heads");
  c.layers = read_dim("layers");
  c.head_hidden = read_dim("head_hidden");
  c.validate();
  Model model = Model::create(c, 0);
  std::uint64_t expected = 0;
  model.for_each([&](const std::string&, const Tensor&) { ++expected; });
  if (get_u64(in) != expected) throw DomainError("checkpoint: tensor count mismatch");
  model.for_each([&](const std::string& name, Tensor& t) {
    const auto rows = get_u64(in);
    const auto cols = get_u64(in);
    if (rows != static_cast<std::uint64_t>(t.rows()) || cols != static_cast<std::uint64_t>(t.cols())) {
      throw DomainError("checkpoint: shape mismatch for " + name);
    }
    t = get_matrix(in, t.rows(), t.cols());
  });
  return model;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_model(out, model);
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_model(in);
}

}  // namespace angle_i2p::net
