#include "angle_i2p/selftest.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <ostream>
#include <string>

#include "angle_i2p/geometry.hpp"
#include "angle_i2p/net/network.hpp"
#include "angle_i2p/pipeline.hpp"
#include "angle_i2p/reference.hpp"
#include "angle_i2p/synth.hpp"

namespace angle_i2p {
namespace {

SyntheticScene small_scene(double scale, std::uint64_t seed) {
  SceneConfig cfg;
  cfg.n_points = 64;
  cfg.depth_scale = scale;
  cfg.outlier_ratio = 0.25;
  cfg.seed = seed;
  return generate_scene(cfg);
}

std::vector<Index> iota_indices(std::size_t n) {
  std::vector<Index> out(n);
  std::iota(out.begin(), out.end(), Index{0});
  return out;
}

bool check_scale_invariance() {
  const auto a = small_scene(1.0, 7);
  const auto b = small_scene(2.5, 7);
  const auto group = iota_indices(a.corrs.size());
  const auto ta = consistency_matrix(a.corrs, group).theta;
  const auto tb = consistency_matrix(b.corrs, group).theta;
  return (ta - tb).cwiseAbs().maxCoeff() <= 1e-9;
}

bool check_oracle() {
  const auto scene = small_scene(1.7, 11);
  const auto group = iota_indices(scene.corrs.size());
  ConsistencyOptions opts;
  for (auto mode : {ConsistencyMode::kAngle, ConsistencyMode::kDistance}) {
    opts.mode = mode;
    const auto fast = consistency_matrix(scene.corrs, group, opts).theta;
    const auto slow = reference::consistency_matrix(scene.corrs, group, opts);
    if ((fast - slow).cwiseAbs().maxCoeff() > 1e-12) return false;
  }
  return true;
}

bool check_theta_identity() {
  net::ModelConfig cfg;
  cfg.d_model = 16;
  cfg.heads = 2;
  cfg.layers = 1;
  const auto model = net::Model::create(cfg, 3);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  net::Tensor fq(9, 16);
  net::Tensor fkv(9, 16);
  for (Eigen::Index i = 0; i < fq.size(); ++i) fq.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < fkv.size(); ++i) fkv.data()[i] = normal(rng);
  const net::Tensor ones = net::Tensor::Ones(9, 9);
  const auto& layer = model.blocks[0].self_attn;
  const auto plain = net::reweighted_attention(fq, fkv, nullptr, layer, 2);
  const auto unit = net::reweighted_attention(fq, fkv, &ones, layer, 2);
  const auto slow = reference::attention(fq, fkv, &ones, layer, 2);
  return (plain - unit).cwiseAbs().maxCoeff() <= 1e-12 &&
         (unit - slow).cwiseAbs().maxCoeff() <= 1e-10;
}

bool check_softmax() {
  net::Tensor logits(3, 4);
  logits << 0, 1, 2, 3, -50, 0, 50, 1, 1, 1, 1, 1;
  const auto p = net::softmax_rows(logits);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    if (std::abs(p.row(r).sum() - 1.0) > 1e-12 || (p.row(r).array() < 0.0).any()) return false;
  }
  return true;
}

bool check_gradient() {
  SceneConfig scfg;
  scfg.n_points = 12;
  scfg.outlier_ratio = 0.5;
  scfg.seed = 21;
  const auto scene = generate_scene(scfg);
  PipelineConfig pcfg;
  pcfg.num_nodes = 2;
  pcfg.k_local = 6;
  pcfg.k_global = 4;
  pcfg.num_keypoints = 5;
  pcfg.normal_k = 4;
  auto prepared = prepare_sample(scene.corrs, pcfg);
  prepared.sample.labels = *scene.corrs.gt_labels;

  net::ModelConfig mcfg;
  mcfg.d_model = 8;
  mcfg.heads = 2;
  mcfg.layers = 1;
  const auto model = net::Model::create(mcfg, 9);
  const auto analytic = net::loss_and_grad(model, prepared.sample);
  const auto numeric = reference::numeric_gradient(model, [&](const net::Model& m) {
    return net::loss_and_grad(m, prepared.sample).loss;
  });
  double diff = 0.0;
  double scale = 0.0;
  std::vector<const net::Tensor*> a;
  std::vector<const net::Tensor*> n;
  analytic.grad.for_each([&](const std::string&, const net::Tensor& t) { a.push_back(&t); });
  numeric.for_each([&](const std::string&, const net::Tensor& t) { n.push_back(&t); });
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (*a[i] - *n[i]).squaredNorm();
    scale += n[i]->squaredNorm();
  }
  return std::sqrt(diff) <= 1e-4 * std::max(std::sqrt(scale), 1e-12);
}

}  // namespace

bool run_selftest(std::ostream& out) {
  struct Check {
    const char* name;
    std::function<bool()> run;
  };
  const Check checks[] = {
      {"scale_invariance", check_scale_invariance},
      {"consistency_oracle", check_oracle},
      {"theta_identity", check_theta_identity},
      {"softmax_rows", check_softmax},
      {"gradient", check_gradient},
  };
  bool all = true;
  for (const auto& check : checks) {
    bool ok = false;
    try {
      ok = check.run();
    } catch (const std::exception& e) {
      out << "error in " << check.name << ": " << e.what() << '\n';
    }
    out << (ok ? "PASS " : "FAIL ") << check.name << '\n';
    all = all && ok;
  }
  return all;
}

}  // namespace angle_i2p
