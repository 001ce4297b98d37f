#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "angle_i2p/correspondence_io.hpp"
#include "angle_i2p/net/model.hpp"
#include "angle_i2p/net/train.hpp"
#include "angle_i2p/pipeline.hpp"
#include "angle_i2p/pose_eval.hpp"
#include "angle_i2p/selftest.hpp"
#include "angle_i2p/synth.hpp"

namespace angle_i2p::cli {
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

const std::string& require_path(const RunConfig& config, const std::string& key) {
  const auto& v = config.get(key);
  if (v.empty()) throw ConfigError(key, "required by this command (use --" + key + ")");
  return v;
}

std::string short_real(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

std::vector<double> parse_taus(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

struct NamedScene {
  std::string name;
  CorrespondenceSet corrs;
};

std::vector<NamedScene> scenes_of(const Dataset& data, const std::vector<std::size_t>& indices) {
  std::vector<NamedScene> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back({data.manifest[i].name, data.scenes[i].corrs});
  return out;
}

/// Scenes an evaluation-type command works on: --input wins over --data.
std::vector<NamedScene> evaluation_scenes(const RunConfig& config, std::ostream& log) {
  if (!config.get("input").empty()) {
    const fs::path path = config.get("input");
    log << "input " << path.filename().string() << '\n';
    return {{path.stem().string(), load_correspondences(path)}};
  }
  const auto data = load_dataset(require_path(config, "data"));
  const auto indices = evaluation_indices(data.manifest);
  log << "evaluating " << indices.size() << " of " << data.scenes.size() << " scenes\n";
  return scenes_of(data, indices);
}

std::vector<net::Sample> prepare_all(const Dataset& data, const std::vector<std::size_t>& indices,
                                     const PipelineConfig& pipeline) {
  std::vector<net::Sample> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(prepare_sample(data.scenes[i].corrs, pipeline).sample);
  return out;
}

std::vector<double> score(const net::Model& model, const CorrespondenceSet& corrs,
                          const PipelineConfig& pipeline, const net::NetworkOptions& options) {
  const auto prepared = prepare_sample(corrs, pipeline);
  return net::predict(model, prepared.sample, options);
}

struct EvalOutcome {
  std::vector<SceneMetrics> scenes;
  MetricsReport report;
};

/// Evaluates each scene, optionally after filtering with `model` at `tau`.
/// Registration is always judged on the unfiltered scene's points.
EvalOutcome evaluate_all(const std::vector<NamedScene>& scenes, const net::Model* model,
                         double tau, const PipelineConfig& pipeline,
                         const net::NetworkOptions& options, EvalThresholds thresholds,
                         std::uint64_t seed) {
  EvalOutcome out;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& scene = scenes[i];
    if (!scene.corrs.gt_pose) {
      throw std::runtime_error("scene " + scene.name + " carries no ground-truth pose");
    }
    const auto reference = points_of(scene.corrs);
    CorrespondenceSet kept = scene.corrs;
    if (model) kept = net::filter(scene.corrs, score(*model, scene.corrs, pipeline, options), tau).set;
    thresholds.ransac.seed = scene_ransac_seed(seed, i);
    auto m = evaluate_scene(kept, *scene.corrs.gt_pose, thresholds, reference);
    m.name = scene.name;
    out.scenes.push_back(std::move(m));
  }
  out.report = aggregate(out.scenes, thresholds);
  return out;
}

net::Model train_model(const Dataset& data, const PipelineConfig& pipeline,
                       const net::ModelConfig& model_config, const net::TrainConfig& train_config,
                       std::uint64_t seed, std::ostream& log, net::TrainHistory* history) {
  const auto train_idx = split_indices(data.manifest, Split::kTrain);
  const auto val_idx = split_indices(data.manifest, Split::kVal);
  if (train_idx.empty()) throw std::runtime_error("dataset has no training scenes");
  const auto train_set = prepare_all(data, train_idx, pipeline);
  const auto val_set = prepare_all(data, val_idx, pipeline);
  log << "training on " << train_set.size() << " scenes, validating on " << val_set.size() << '\n';

  auto model = net::Model::create(model_config, seed);
  auto h = net::train(model, train_set, val_set, train_config, [&](const net::EpochRecord& r) {
    log << "epoch " << r.epoch << " loss " << format_real(r.loss) << " val_ir "
        << format_real(r.val_ir) << '\n';
  });
  if (history) *history = std::move(h);
  return model;
}

void log_report(std::ostream& log, const std::string& label, const MetricsReport& r) {
  log << label << ": ir " << format_real(r.inlier_ratio) << " rr "
      << format_real(r.registration_recall) << " pnp_failures " << r.pnp_failures << '\n';
}

}  // namespace

std::uint64_t scene_ransac_seed(std::uint64_t seed, std::size_t index) {
  std::uint64_t state = seed ^ (0xA5A5A5A5ULL + 0x9E3779B97F4A7C15ULL * (index + 1));
  return splitmix64(state);
}

int cmd_generate(Context& ctx) {
  const auto data = make_dataset(ctx.config.dataset());
  save_dataset(ctx.out_dir, data);
  double ir = 0.0;
  for (const auto& s : data.scenes) {
    std::size_t inliers = 0;
    for (bool b : *s.corrs.gt_labels) inliers += b;
    ir += static_cast<double>(inliers) / static_cast<double>(s.corrs.size());
  }
  ir /= static_cast<double>(data.scenes.size());
  ctx.log << "generated " << data.scenes.size() << " scenes: train "
          << split_indices(data.manifest, Split::kTrain).size() << ", val "
          << split_indices(data.manifest, Split::kVal).size() << ", test "
          << split_indices(data.manifest, Split::kTest).size() << '\n';
  ctx.log << "mean input inlier ratio " << format_real(ir) << '\n';
  return 0;
}

int cmd_train(Context& ctx) {
  const auto& c = ctx.config;
  const auto data = load_dataset(require_path(c, "data"));
  net::TrainHistory history;
  const auto model = train_model(data, c.pipeline(), c.model(), c.train(),
                                 c.unsigned_integer("seed"), ctx.log, &history);
  net::save_model(ctx.out_dir / "model.bin", model);
  auto csv = open_out(ctx.out_dir / "history.csv");
  net::write_history_csv(csv, history);
  ctx.log << "parameters " << model.parameter_count() << '\n';
  return 0;
}

int cmd_filter(Context& ctx) {
  const auto& c = ctx.config;
  const auto model = net::load_model(require_path(c, "model"));
  const auto pipeline = c.pipeline();
  const auto options = c.train().network;
  const double tau = c.real("tau");

  auto run_one = [&](const CorrespondenceSet& corrs, const fs::path& filtered_path,
                     const fs::path& scores_path, const std::string& name) {
    const auto scores = score(model, corrs, pipeline, options);
    const auto result = net::filter(corrs, scores, tau);
    save_correspondences(filtered_path, result.set);
    auto csv = open_out(scores_path);
    csv << "index,score,kept\n";
    std::vector<bool> kept(corrs.size(), false);
    for (auto k : result.kept) kept[k] = true;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      csv << i << ',' << format_real(scores[i]) << ',' << (kept[i] ? 1 : 0) << '\n';
    }
    ctx.log << name << ": kept " << result.kept.size() << " of " << corrs.size() << '\n';
    if (result.empty) ctx.log << "warning: " << name << " retained no correspondences\n";
  };

  if (!c.get("input").empty()) {
    const fs::path input = c.get("input");
    run_one(load_correspondences(input), ctx.out_dir / "filtered.txt", ctx.out_dir / "scores.csv",
            input.stem().string());
    return 0;
  }
  const auto data = load_dataset(require_path(c, "data"));
  fs::create_directories(ctx.out_dir / "filtered");
  fs::create_directories(ctx.out_dir / "scores");
  for (auto i : evaluation_indices(data.manifest)) {
    const auto& name = data.manifest[i].name;
    run_one(data.scenes[i].corrs, ctx.out_dir / "filtered" / (name + ".txt"),
            ctx.out_dir / "scores" / (name + ".csv"), name);
  }
  return 0;
}

int cmd_evaluate(Context& ctx) {
  const auto& c = ctx.config;
  const auto scenes = evaluation_scenes(c, ctx.log);
  std::optional<net::Model> model;
  if (!c.get("model").empty()) model = net::load_model(c.get("model"));
  const auto outcome = evaluate_all(scenes, model ? &*model : nullptr, c.real("tau"), c.pipeline(),
                                    c.train().network, c.thresholds(), c.unsigned_integer("seed"));
  auto csv = open_out(ctx.out_dir / "metrics.csv");
  write_metrics_csv(csv, outcome.scenes);
  auto summary = open_out(ctx.out_dir / "summary.txt");
  write_summary(summary, outcome.report);
  log_report(ctx.log, model ? "filtered" : "unfiltered", outcome.report);
  return 0;
}

int cmd_ablate(Context& ctx) {
  const auto& c = ctx.config;
  const auto data = load_dataset(require_path(c, "data"));
  const auto scenes = scenes_of(data, evaluation_indices(data.manifest));
  const auto seed = c.unsigned_integer("seed");
  const auto thresholds = c.thresholds();
  const double tau = c.real("tau");

  auto csv = open_out(ctx.out_dir / "ablation.csv");
  csv << "variant,tau,ir,rr,mre_deg,mte_m,pnp_failures\n";
  auto row = [&](const std::string& variant, const std::string& tau_text, const MetricsReport& r) {
    csv << variant << ',' << tau_text << ',' << format_real(r.inlier_ratio) << ','
        << format_real(r.registration_recall) << ',' << format_real(r.mean_rotation_error) << ','
        << format_real(r.mean_translation_error) << ',' << r.pnp_failures << '\n';
    log_report(ctx.log, variant + " tau " + tau_text, r);
  };

  const auto base_train = c.train();
  const auto unfiltered =
      evaluate_all(scenes, nullptr, tau, c.pipeline(), base_train.network, thresholds, seed);
  row("unfiltered", "none", unfiltered.report);

  struct Variant {
    const char* name;
    PipelineConfig pipeline;
    net::TrainConfig train;
  };
  std::vector<Variant> variants;
  variants.push_back({"full", c.pipeline(), base_train});
  variants.push_back({"no_scale_alignment", c.pipeline(), base_train});
  variants.back().pipeline.scale_alignment = false;
  variants.push_back({"distance_consistency", c.pipeline(), base_train});
  variants.back().pipeline.consistency.mode = ConsistencyMode::kDistance;
  variants.push_back({"no_cross_attention", c.pipeline(), base_train});
  variants.back().train.network.cross_attention = false;
  variants.push_back({"no_reweight", c.pipeline(), base_train});
  variants.back().train.network.reweight = false;

  const auto taus = parse_taus(c.get("ablate_taus"));
  for (const auto& v : variants) {
    ctx.log << "variant " << v.name << '\n';
    const auto model = train_model(data, v.pipeline, c.model(), v.train, seed, ctx.log, nullptr);
    if (std::string(v.name) == "full") {
      for (double t : taus) {
        const auto r = evaluate_all(scenes, &model, t, v.pipeline, v.train.network, thresholds, seed);
        row(v.name, short_real(t), r.report);
      }
    } else {
      const auto r = evaluate_all(scenes, &model, tau, v.pipeline, v.train.network, thresholds, seed);
      row(v.name, short_real(tau), r.report);
    }
  }
  return 0;
}

int cmd_selftest(Context& ctx) {
  std::ostringstream report;
  const bool ok = run_selftest(report);
  auto file = open_out(ctx.out_dir / "selftest.txt");
  file << report.str();
  ctx.log << report.str() << (ok ? "selftest passed\n" : "selftest FAILED\n");
  return ok ? 0 : 1;
}

}  // namespace angle_i2p::cli
