// Acceptance suite: one PASS/FAIL line per criterion. The exit status is
// zero when the suite ran to completion; a failing criterion is reported, not
// hidden, and does not abort the remaining ones.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "angle_i2p/geometry.hpp"
#include "angle_i2p/graph.hpp"
#include "angle_i2p/net/network.hpp"
#include "angle_i2p/net/train.hpp"
#include "angle_i2p/pipeline.hpp"
#include "angle_i2p/pnp.hpp"
#include "angle_i2p/pose_eval.hpp"
#include "angle_i2p/reference.hpp"
#include "angle_i2p/synth.hpp"
#include "cli.hpp"

using namespace angle_i2p;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Index> iota(std::size_t n) {
  std::vector<Index> out(n);
  std::iota(out.begin(), out.end(), Index{0});
  return out;
}

double inlier_fraction(const std::vector<bool>& labels) {
  if (labels.empty()) return 0.0;
  return static_cast<double>(std::count(labels.begin(), labels.end(), true)) /
         static_cast<double>(labels.size());
}

// 1. Angle consistency ignores a similarity transform of the estimated side.
Outcome scale_invariance() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), us(0.1, 10.0), ut(-5.0, 5.0);
  std::uniform_int_distribution<int> un(3, 60);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    CorrespondenceSet set;
    const auto n = static_cast<std::size_t>(un(rng));
    for (std::size_t i = 0; i < n; ++i) {
      Correspondence c;
      c.point = Point3(unit(rng), unit(rng), unit(rng));
      c.est_point = Point3(unit(rng), unit(rng), unit(rng));
      set.items.push_back(c);
    }
    // Center the estimated side so O is a centered set.
    Point3 mean = Point3::Zero();
    for (const auto& c : set.items) mean += c.est_point;
    mean /= static_cast<double>(n);
    for (auto& c : set.items) c.est_point -= mean;
    auto moved = set;
    const double s = us(rng);
    const Point3 t(ut(rng), ut(rng), ut(rng));
    for (auto& c : moved.items) c.est_point = s * c.est_point + t;
    const auto group = iota(n);
    const auto a = consistency_matrix(set, group).theta;
    const auto b = consistency_matrix(moved, group).theta;
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0,
          fmt("max |diff| %.3g over 1000 sets (tol 1e-9), %.2f s (limit 10 s)", worst, secs)};
}

// 2. Fast paths against the scalar references.
Outcome oracle_equivalence() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> un(4, 200);
  std::uniform_real_distribution<double> unit(-3.0, 3.0);
  std::uniform_int_distribution<int> coarse(-4, 4);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(un(rng));
    CorrespondenceSet set;
    for (std::size_t i = 0; i < n; ++i) {
      Correspondence c;
      // Every third instance sits on a lattice so ties are exercised.
      c.point = trial % 3 == 0 ? Point3(coarse(rng), coarse(rng), coarse(rng))
                               : Point3(unit(rng), unit(rng), unit(rng));
      c.est_point = Point3(unit(rng), unit(rng), unit(rng) + 5.0);
      set.items.push_back(c);
    }
    const auto group = iota(n);
    for (auto mode : {ConsistencyMode::kAngle, ConsistencyMode::kDistance}) {
      ConsistencyOptions opt;
      opt.mode = mode;
      const auto fast = consistency_matrix(set, group, opt).theta;
      if ((fast - reference::consistency_matrix(set, group, opt)).cwiseAbs().maxCoeff() != 0.0)
        ++mismatches;
    }
    const auto pts = points_of(set);
    const std::size_t v = (n + 15) / 16;
    const auto nodes = sample_nodes(set, v, 0);
    if (nodes.indices != reference::farthest_point_sampling(pts, v, reference::centroid_nearest(pts)))
      ++mismatches;
    const std::size_t k = std::min<std::size_t>(32, n);
    if (knn_assign(nodes, set, k) != reference::knn(nodes.nodes, pts, k)) ++mismatches;
  }
  return {mismatches == 0, fmt("%d mismatches over 100 instances (consistency x2, FPS, KNN)", mismatches)};
}

// 3. Scale recovery, noiseless and under 1% depth noise.
Outcome scale_recovery() {
  double worst_exact = 0.0;
  for (double s : {0.5, 1.3, 2.5}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      SceneConfig c;
      c.n_points = 200;
      c.depth_scale = s;
      c.seed = 300 + seed;
      const auto scene = generate_scene(c);
      worst_exact = std::max(worst_exact, std::abs(estimate_scale(scene.corrs) - s));
    }
  }
  int ok = 0;
  double worst_rel = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SceneConfig c;
    c.n_points = 500;
    c.depth_scale = 1.3;
    c.depth_noise_sigma = 0.01;
    c.seed = 2000 + seed;
    const auto scene = generate_scene(c);
    const double rel = std::abs(estimate_scale(scene.corrs) - 1.3) / 1.3;
    worst_rel = std::max(worst_rel, rel);
    if (rel < 0.05) ++ok;
  }
  return {worst_exact < 1e-9 && ok >= 95,
          fmt("noiseless max |s_est - s| %.3g (tol 1e-9); noisy %d/100 within 5%% (need 95), worst %.4f",
              worst_exact, ok, worst_rel)};
}

// 4. Analytic gradients against central differences on the reduced model.
Outcome gradient_check() {
  const auto t0 = Clock::now();
  SceneConfig sc;
  sc.n_points = 12;
  sc.outlier_ratio = 0.5;
  sc.depth_scale = 1.4;
  sc.depth_noise_sigma = 0.01;
  sc.seed = 404;
  const auto scene = generate_scene(sc);
  PipelineConfig pc;
  pc.num_nodes = 2;
  pc.k_local = 6;
  pc.k_global = 4;
  pc.num_keypoints = 5;
  pc.normal_k = 4;
  pc.cross_theta = true;
  const auto sample = prepare_sample(scene.corrs, pc).sample;
  net::ModelConfig mc;
  mc.d_model = 8;
  mc.heads = 2;
  mc.layers = 1;
  const auto model = net::Model::create(mc, 4);

  double worst = 0.0;
  double worst_abs = 0.0;
  int vanishing = 0;
  std::string worst_name;
  for (bool cross_theta : {false, true}) {
    net::NetworkOptions opt;
    opt.cross_theta = cross_theta;
    const auto analytic = net::loss_and_grad(model, sample, {}, opt);
    const auto numeric = reference::numeric_gradient(model, [&](const net::Model& m) {
      return net::loss_and_grad(m, sample, {}, opt).loss;
    }, 1e-5);
    std::vector<std::pair<std::string, net::Tensor>> a;
    std::vector<net::Tensor> n;
    analytic.grad.for_each([&](const std::string& name, const net::Tensor& t) { a.emplace_back(name, t); });
    numeric.for_each([&](const std::string&, const net::Tensor& t) { n.push_back(t); });
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double err = (a[i].second - n[i]).norm();
      const double scale = std::max(a[i].second.norm(), n[i].norm());
      // Shift-invariant parameters (key bias under a unit Θ) have an exactly
      // zero gradient; a ratio of two round-off residues says nothing.
      if (scale < 1e-9) {
        ++vanishing;
        worst_abs = std::max(worst_abs, err);
        continue;
      }
      const double rel = err / scale;
      if (rel > worst) {
        worst = rel;
        worst_name = a[i].first;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && worst_abs < 1e-9 && secs < 60.0,
          fmt("worst per-tensor relative error %.3g at %s (tol 1e-4); %d zero-gradient tensors, "
              "max abs %.2g (tol 1e-9); %.2f s (limit 60 s)",
              worst, worst_name.c_str(), vanishing, worst_abs, secs)};
}

// 5. Θ = 1 reduces reweighted attention to plain attention, layer and network.
Outcome theta_identity() {
  std::mt19937_64 rng(505);
  std::normal_distribution<double> g;
  net::ModelConfig mc;
  mc.d_model = 32;
  mc.heads = 4;
  mc.layers = 2;
  const auto model = net::Model::create(mc, 5);
  net::Tensor fq(20, 32), fkv(15, 32);
  for (Eigen::Index i = 0; i < fq.size(); ++i) fq.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < fkv.size(); ++i) fkv.data()[i] = g(rng);
  const net::Tensor ones = net::Tensor::Ones(20, 15);
  const auto& layer = model.blocks[0].self_attn;
  const double layer_diff = (net::reweighted_attention(fq, fkv, &ones, layer, 4) -
                             net::reweighted_attention(fq, fkv, nullptr, layer, 4))
                                .cwiseAbs()
                                .maxCoeff();

  SceneConfig sc;
  sc.n_points = 96;
  sc.outlier_ratio = 0.5;
  sc.seed = 55;
  PipelineConfig pc;
  pc.k_local = 16;
  pc.k_global = 8;
  pc.num_keypoints = 24;
  auto sample = prepare_sample(generate_scene(sc).corrs, pc).sample;
  net::NetworkOptions no_reweight;
  no_reweight.reweight = false;
  const auto plain = net::predict(model, sample, no_reweight);
  for (auto& t : sample.graph.theta_local) t.setOnes();
  for (auto& t : sample.graph.theta_global) t.setOnes();
  const auto unit = net::predict(model, sample, {});
  double net_diff = 0.0;
  for (std::size_t i = 0; i < plain.size(); ++i) net_diff = std::max(net_diff, std::abs(plain[i] - unit[i]));
  return {layer_diff <= 1e-12 && net_diff <= 1e-12,
          fmt("attention max |diff| %.3g, network scores max |diff| %.3g (tol 1e-12)", layer_diff, net_diff)};
}

// 6. PnP-RANSAC on 40% inliers with 1 px noise, plus exact recovery.
Outcome ransac_robustness() {
  const auto t0 = Clock::now();
  int pass = 0, oracle_pass = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    SceneConfig c;
    c.n_points = 100;
    c.outlier_ratio = 0.6;
    c.pixel_noise_px = 1.0;
    c.seed = 1000 + s;
    const auto scene = generate_scene(c);
    const Pose& gt = *scene.corrs.gt_pose;
    RansacOptions opt;
    opt.iterations = 1000;
    opt.seed = s;
    const auto r = solve_pnp_ransac(scene.corrs, opt);
    if (r.success && rotation_error(r.pose.rotation, gt.rotation) < 1.0 &&
        translation_error(r.pose.translation, gt.translation) < 0.01)
      ++pass;

    // Maximum-likelihood bound: refine from the truth on the true inliers.
    std::vector<Pixel> px;
    std::vector<Point3> pts;
    for (std::size_t i = 0; i < scene.corrs.size(); ++i) {
      if (!(*scene.corrs.gt_labels)[i]) continue;
      px.push_back(scene.corrs.items[i].pixel);
      pts.push_back(scene.corrs.items[i].point);
    }
    const auto ml = refine_pose(gt, px, pts, scene.corrs.intrinsics);
    if (rotation_error(ml.rotation, gt.rotation) < 1.0 &&
        translation_error(ml.translation, gt.translation) < 0.01)
      ++oracle_pass;
  }
  double exact_rot = 0.0, exact_trans = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    SceneConfig c;
    c.n_points = 20;
    c.seed = 5000 + s;
    const auto scene = generate_scene(c);
    const auto r = solve_pnp_ransac(scene.corrs);
    const Pose& gt = *scene.corrs.gt_pose;
    exact_rot = std::max(exact_rot, r.success ? rotation_error(r.pose.rotation, gt.rotation) : 180.0);
    exact_trans = std::max(exact_trans, r.success ? translation_error(r.pose.translation, gt.translation) : 1e9);
  }
  const double secs = seconds_since(t0);
  return {pass >= 95 && exact_rot < 1e-6 && secs < 120.0,
          fmt("%d/100 under 1 deg / 1 cm (need 95; ground-truth-initialized ML fit on true inliers: "
              "%d/100); exact input max error %.3g deg %.3g m (tol 1e-6 deg); %.1f s (limit 120 s)",
              pass, oracle_pass, exact_rot, exact_trans, secs)};
}

struct EndToEnd {
  bool ok = false;
  double input_ir = 0.0;
  std::vector<double> taus = {0.2, 0.4, 0.5};
  std::vector<double> filtered_ir;
  std::vector<double> filtered_rr;
  double unfiltered_rr = 0.0;
  double seconds = 0.0;
  int epochs = 0;
  std::size_t test_scenes = 0;
};

// Shared by the filtering-gain and τ-sweep criteria: one dataset, one model.
EndToEnd run_end_to_end() {
  const auto t0 = Clock::now();
  EndToEnd out;
  DatasetConfig dc;
  dc.n_scenes = 200;
  dc.seed = 7;
  dc.base.n_points = 256;
  dc.base.outlier_ratio = 0.7;
  dc.base.depth_noise_sigma = 0.01;
  dc.scale_min = 0.8;
  dc.scale_max = 1.5;
  const auto data = make_dataset(dc);
  const PipelineConfig pc;
  std::vector<net::Sample> train_set, val_set, test_set;
  std::vector<std::size_t> test_idx;
  for (std::size_t i = 0; i < data.scenes.size(); ++i) {
    auto sample = prepare_sample(data.scenes[i].corrs, pc).sample;
    switch (data.manifest[i].split) {
      case Split::kTrain: train_set.push_back(std::move(sample)); break;
      case Split::kVal: val_set.push_back(std::move(sample)); break;
      case Split::kTest:
        test_set.push_back(std::move(sample));
        test_idx.push_back(i);
        break;
    }
  }
  out.test_scenes = test_set.size();

  net::ModelConfig mc;
  mc.d_model = 32;
  mc.heads = 4;
  mc.layers = 3;
  auto model = net::Model::create(mc, 1);
  net::TrainConfig tc;
  tc.epochs = 50;
  tc.learning_rate = 1e-4;
  tc.weight_decay = 1e-6;
  tc.seed = 3;
  const auto history = net::train(model, train_set, val_set, tc);
  out.epochs = static_cast<int>(history.epochs.size());

  for (auto i : test_idx) out.input_ir += inlier_fraction(*data.scenes[i].corrs.gt_labels);
  out.input_ir /= static_cast<double>(test_idx.size());

  out.filtered_ir.assign(out.taus.size(), 0.0);
  out.filtered_rr.assign(out.taus.size(), 0.0);
  EvalThresholds thr;
  thr.ransac.iterations = 1000;
  for (std::size_t k = 0; k < test_idx.size(); ++k) {
    const auto& corrs = data.scenes[test_idx[k]].corrs;
    const auto reference_points = points_of(corrs);
    thr.ransac.seed = k;
    out.unfiltered_rr += evaluate_scene(corrs, *corrs.gt_pose, thr, reference_points).rr_pass;
    const auto scores = net::predict(model, test_set[k]);
    for (std::size_t t = 0; t < out.taus.size(); ++t) {
      const auto kept = net::filter(corrs, scores, out.taus[t]);
      out.filtered_ir[t] += kept.empty ? 0.0 : inlier_fraction(*kept.set.gt_labels);
      out.filtered_rr[t] += evaluate_scene(kept.set, *corrs.gt_pose, thr, reference_points).rr_pass;
    }
  }
  const auto n = static_cast<double>(test_idx.size());
  out.unfiltered_rr /= n;
  for (std::size_t t = 0; t < out.taus.size(); ++t) {
    out.filtered_ir[t] /= n;
    out.filtered_rr[t] /= n;
  }
  out.seconds = seconds_since(t0);
  out.ok = true;
  return out;
}

// 9. Angle voting beats distance voting under a 2x depth scale.
Outcome angle_vs_distance() {
  int wins = 0;
  double ir_angle = 0.0, ir_dist = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    SceneConfig c;
    c.n_points = 200;
    c.depth_scale = 2.0;
    c.outlier_ratio = 0.5;
    c.depth_noise_sigma = 0.01;
    c.seed = 7000 + s;
    const auto scene = generate_scene(c);
    const auto& labels = *scene.corrs.gt_labels;
    const auto keep = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
    ConsistencyOptions angle, dist;
    dist.mode = ConsistencyMode::kDistance;
    const auto ka = top_voted(consistency_votes(scene.corrs, angle), keep);
    const auto kd = top_voted(consistency_votes(scene.corrs, dist), keep);
    double a = 0.0, d = 0.0;
    for (auto i : ka) a += labels[i];
    for (auto i : kd) d += labels[i];
    a /= static_cast<double>(keep);
    d /= static_cast<double>(keep);
    ir_angle += a;
    ir_dist += d;
    if (a > d) ++wins;
  }
  return {wins >= 90, fmt("angle strictly higher on %d/100 scenes (need 90); mean IR angle %.3f, distance %.3f",
                          wins, ir_angle / 100.0, ir_dist / 100.0)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// 10. Every command rerun from its recorded config reproduces its artifacts.
Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "angle_i2p_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ostringstream sink, err;
  auto call = [&](std::vector<std::string> args) { return cli::run(args, sink, err); };
  const std::string data = (root / "generate_1").string();
  const std::vector<std::string> tiny = {"--set", "d_model=16", "--set", "heads=2", "--set", "layers=1",
                                         "--set", "ransac_iterations=200", "--epochs", "2"};
  auto with = [&](std::vector<std::string> a, bool model_args) {
    if (model_args) a.insert(a.end(), tiny.begin(), tiny.end());
    return a;
  };

  struct Run {
    std::string name;
    std::vector<std::string> args;
  };
  std::vector<Run> runs = {
      {"generate", {"generate", "--scenes", "12", "--outlier-ratio", "0.7", "--seed", "7", "--set", "n_points=96"}},
      {"train", with({"train", "--data", data, "--seed", "7"}, true)},
      {"filter", with({"filter", "--data", data, "--model", (root / "train_1" / "model.bin").string()}, true)},
      {"evaluate", with({"evaluate", "--data", data, "--model", (root / "train_1" / "model.bin").string()}, true)},
      {"ablate", with({"ablate", "--data", data}, true)},
      {"selftest", {"selftest"}},
  };
  std::vector<std::string> failures;
  std::size_t files = 0;
  for (const auto& run : runs) {
    const fs::path first = root / (run.name + "_1");
    const fs::path second = root / (run.name + "_2");
    auto args = run.args;
    args.insert(args.end(), {"--out", first.string()});
    if (call(args) != 0) {
      failures.push_back(run.name + " (first run: " + err.str() + ")");
      continue;
    }
    if (call({run.name, "--config", (first / "config.txt").string(), "--out", second.string()}) != 0) {
      failures.push_back(run.name + " (rerun: " + err.str() + ")");
      continue;
    }
    for (const auto& entry : fs::recursive_directory_iterator(first)) {
      if (!entry.is_regular_file()) continue;
      ++files;
      const auto rel = fs::relative(entry.path(), first);
      if (!fs::exists(second / rel) || slurp(entry.path()) != slurp(second / rel)) {
        failures.push_back(run.name + "/" + rel.string());
      }
    }
  }
  fs::remove_all(root);
  std::string detail = fmt("%zu artifacts from 6 commands compared byte-for-byte", files);
  if (!failures.empty()) detail += "; differing: " + failures.front();
  return {failures.empty() && files > 0, detail};
}

}  // namespace

int main() {
  int passed = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
    if (o.pass) ++passed;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "scale invariance of angle consistency", guarded(scale_invariance));
  report(2, "brute-force oracle equivalence", guarded(oracle_equivalence));
  report(3, "scale estimate recovery", guarded(scale_recovery));
  report(4, "gradient correctness", guarded(gradient_check));
  report(5, "theta-identity reduction", guarded(theta_identity));
  report(6, "PnP-RANSAC robustness", guarded(ransac_robustness));

  EndToEnd e2e;
  std::string e2e_error;
  try {
    e2e = run_end_to_end();
  } catch (const std::exception& e) {
    e2e_error = e.what();
  }
  if (e2e.ok) {
    const double ir_gain = e2e.filtered_ir[0] - e2e.input_ir;
    const double rr_gain = e2e.filtered_rr[0] - e2e.unfiltered_rr;
    report(7, "end-to-end filtering gain",
           {ir_gain >= 0.15 && rr_gain >= 0.05 && e2e.seconds < 1800.0 && e2e.epochs <= 50,
            fmt("test scenes %zu: IR %.3f -> %.3f (+%.1f pp, need 15); RR %.3f -> %.3f (+%.1f pp, need 5); "
                "%d epochs, %.0f s (limit 1800 s)",
                e2e.test_scenes, e2e.input_ir, e2e.filtered_ir[0], 100.0 * ir_gain, e2e.unfiltered_rr,
                e2e.filtered_rr[0], 100.0 * rr_gain, e2e.epochs, e2e.seconds)});
    bool monotone = true;
    for (std::size_t t = 1; t < e2e.taus.size(); ++t) monotone = monotone && e2e.filtered_ir[t] >= e2e.filtered_ir[t - 1];
    report(8, "tau monotonicity",
           {monotone, fmt("IR at tau 0.2/0.4/0.5 = %.3f/%.3f/%.3f; RR = %.3f/%.3f/%.3f (reported only)",
                          e2e.filtered_ir[0], e2e.filtered_ir[1], e2e.filtered_ir[2], e2e.filtered_rr[0],
                          e2e.filtered_rr[1], e2e.filtered_rr[2])});
  } else {
    report(7, "end-to-end filtering gain", {false, "exception: " + e2e_error});
    report(8, "tau monotonicity", {false, "exception: " + e2e_error});
  }

  report(9, "angle vs distance voting under depth scale", guarded(angle_vs_distance));
  report(10, "CLI determinism", guarded(cli_determinism));
  std::cout << passed << "/10 criteria passed" << std::endl;
  return 0;
}
