#include <numeric>
#include <random>

#include <benchmark/benchmark.h>

#include "angle_i2p/geometry.hpp"
#include "angle_i2p/graph.hpp"
#include "angle_i2p/net/attention.hpp"
#include "angle_i2p/pipeline.hpp"
#include "angle_i2p/pnp.hpp"
#include "angle_i2p/synth.hpp"

namespace {

using namespace angle_i2p;

SyntheticScene scene(std::size_t n, double outlier_ratio, double pixel_noise = 0.0) {
  SceneConfig c;
  c.n_points = n;
  c.outlier_ratio = outlier_ratio;
  c.pixel_noise_px = pixel_noise;
  c.depth_scale = 1.5;
  c.seed = 1;
  return generate_scene(c);
}

void BM_ConsistencyMatrix(benchmark::State& state) {
  const auto s = scene(static_cast<std::size_t>(state.range(0)), 0.5);
  std::vector<Index> group(s.corrs.size());
  std::iota(group.begin(), group.end(), Index{0});
  for (auto _ : state) benchmark::DoNotOptimize(consistency_matrix(s.corrs, group).theta.data());
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ConsistencyMatrix)->RangeMultiplier(2)->Range(32, 512)->Complexity();

void BM_KnnAssign(benchmark::State& state) {
  const auto s = scene(static_cast<std::size_t>(state.range(0)), 0.5);
  const auto nodes = sample_nodes(s.corrs, (s.corrs.size() + 15) / 16, 0);
  for (auto _ : state) benchmark::DoNotOptimize(knn_assign(nodes, s.corrs, 32));
}
BENCHMARK(BM_KnnAssign)->RangeMultiplier(2)->Range(64, 1024);

void BM_PrepareSample(benchmark::State& state) {
  const auto s = scene(static_cast<std::size_t>(state.range(0)), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(prepare_sample(s.corrs, {}));
}
BENCHMARK(BM_PrepareSample)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Attention(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  net::ModelConfig cfg;
  cfg.d_model = d;
  cfg.layers = 1;
  const auto model = net::Model::create(cfg, 1);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  net::Tensor f(32, d);
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = g(rng);
  const net::Tensor theta = net::Tensor::Ones(32, 32);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net::reweighted_attention(f, f, &theta, model.blocks[0].self_attn, 4));
  }
}
BENCHMARK(BM_Attention)->Arg(32)->Arg(128);

void BM_Ransac(benchmark::State& state) {
  const auto s = scene(100, 0.6, 1.0);
  RansacOptions opt;
  opt.solver = state.range(0) == 0 ? HypothesisSolver::kDlt6 : HypothesisSolver::kP3P;
  for (auto _ : state) benchmark::DoNotOptimize(solve_pnp_ransac(s.corrs, opt).num_inliers);
}
BENCHMARK(BM_Ransac)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
