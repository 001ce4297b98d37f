#include "run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace angle_i2p::cli {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

void require_enum(const RunConfig& c, const std::string& key, std::initializer_list<const char*> options) {
  const auto& v = c.get(key);
  std::string joined;
  for (const char* o : options) {
    if (v == o) return;
    joined += joined.empty() ? o : std::string(" | ") + o;
  }
  throw ConfigError(key, "'" + v + "' is not one of " + joined);
}

void require_range(const std::string& key, double v, double lo, double hi, bool lo_open,
                   bool hi_open) {
  const bool ok_lo = lo_open ? v > lo : v >= lo;
  const bool ok_hi = hi_open ? v < hi : v <= hi;
  if (!ok_lo || !ok_hi || std::isnan(v)) {
    std::ostringstream msg;
    msg << "value " << v << " must lie in " << (lo_open ? '(' : '[') << lo << ", " << hi
        << (hi_open ? ')' : ']');
    throw ConfigError(key, msg.str());
  }
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

const std::vector<KeySpec>& RunConfig::keys() {
  static const std::vector<KeySpec> specs = {
      {"seed", "0", "master seed for data, initialization, shuffling and RANSAC"},
      {"scenes", "10", "number of scenes to generate"},
      {"n_points", "256", "correspondences per scene"},
      {"outlier_ratio", "0.5", "fraction of injected outliers, [0, 1)"},
      {"outlier_mode", "uniform_resample", "uniform_resample | pixel_shuffle"},
      {"depth_scale_min", "1", "lower bound of the per-scene depth scale"},
      {"depth_scale_max", "1", "upper bound of the per-scene depth scale"},
      {"depth_bias", "0", "constant depth bias in meters"},
      {"depth_noise", "0.01", "relative multiplicative depth noise"},
      {"pixel_noise", "0", "Gaussian pixel noise on inliers, pixels"},
      {"room_width", "6", "room extent along x, meters"},
      {"room_length", "5", "room extent along y, meters"},
      {"room_height", "3", "room extent along z, meters"},
      {"clutter_boxes", "4", "boxes standing in the room"},
      {"consistency_mode", "angle", "angle | distance"},
      {"sigma_d", "0.1", "angle consistency sensitivity"},
      {"sigma_dist", "0.1", "distance consistency sensitivity, meters"},
      {"signed_cosine", "false", "compare signed cosines"},
      {"scale_alignment", "true", "rescale the estimated cloud before feature construction"},
      {"scale_ratio_direction", "reciprocal", "reciprocal | literal"},
      {"num_nodes", "0", "graph nodes; 0 means ceil(N / 16)"},
      {"k_local", "32", "local group size"},
      {"k_global", "32", "global group size"},
      {"num_keypoints", "100", "global keypoints"},
      {"normal_k", "16", "neighbours for normal estimation"},
      {"cross_theta", "none", "none | geometric"},
      {"d_model", "128", "feature width"},
      {"heads", "4", "attention heads"},
      {"layers", "3", "(self, cross) attention blocks"},
      {"head_hidden", "0", "classifier hidden width; 0 means d_model / 2"},
      {"learning_rate", "0.0001", "optimizer step size"},
      {"weight_decay", "1e-06", "decoupled weight decay"},
      {"epochs", "10", "training epochs"},
      {"batch_size", "1", "samples per optimizer step"},
      {"loss", "bce", "bce | focal"},
      {"focal_gamma", "2", "focal loss exponent"},
      {"tau", "0.2", "score threshold for filtering"},
      {"reweight", "true", "multiply consistency into self-attention logits"},
      {"cross_attention", "true", "run the cross-attention sub-layers"},
      {"mask_mode", "false", "mask logits with theta below 1e-6 instead of scaling"},
      {"ransac_iterations", "1000", "RANSAC hypotheses"},
      {"ransac_threshold_px", "3", "reprojection inlier threshold, pixels"},
      {"ransac_solver", "dlt6", "dlt6 | p3p"},
      {"inlier_threshold", "0.05", "inlier ratio distance threshold, meters"},
      {"rr_threshold", "0.1", "registration recall threshold, meters"},
      {"ablate_taus", "0.2,0.4,0.5", "comma-separated tau sweep for ablate"},
      {"data", "", "dataset directory"},
      {"model", "", "model checkpoint"},
      {"input", "", "correspondence file"},
  };
  return specs;
}

RunConfig::RunConfig() {
  for (const auto& k : keys()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "unknown key");
  it->second = value;
}

void RunConfig::load(std::istream& in, const std::string& source) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line, source + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  load(in, path.string());
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "unknown key");
  return it->second;
}

double RunConfig::real(const std::string& key) const {
  const auto& v = get(key);
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key, "'" + v + "' is not a finite number");
  }
  return out;
}

long long RunConfig::integer(const std::string& key) const {
  const auto& v = get(key);
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key, "'" + v + "' is not an integer");
  }
  return out;
}

std::uint64_t RunConfig::unsigned_integer(const std::string& key) const {
  const auto& v = get(key);
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key, "'" + v + "' is not a non-negative integer");
  }
  return out;
}

bool RunConfig::flag(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key, "'" + v + "' is not a boolean");
}

void RunConfig::validate() const {
  unsigned_integer("seed");
  auto positive_int = [&](const char* key, long long lo) {
    const auto v = integer(key);
    if (v < lo) throw ConfigError(key, "must be at least " + std::to_string(lo));
  };
  positive_int("scenes", 1);
  positive_int("n_points", 6);
  positive_int("clutter_boxes", 0);
  positive_int("num_nodes", 0);
  positive_int("k_local", 1);
  positive_int("k_global", 1);
  positive_int("num_keypoints", 1);
  positive_int("normal_k", 3);
  positive_int("d_model", 1);
  positive_int("heads", 1);
  positive_int("layers", 0);
  positive_int("head_hidden", 0);
  positive_int("epochs", 0);
  positive_int("batch_size", 1);
  positive_int("ransac_iterations", 1);
  if (integer("d_model") % integer("heads") != 0) {
    throw ConfigError("heads", "must divide d_model");
  }
  if (integer("k_global") > integer("num_keypoints")) {
    throw ConfigError("k_global", "must not exceed num_keypoints");
  }

  require_range("outlier_ratio", real("outlier_ratio"), 0.0, 1.0, false, true);
  require_range("depth_scale_min", real("depth_scale_min"), 0.0, kInf, true, true);
  require_range("depth_scale_max", real("depth_scale_max"), real("depth_scale_min"), kInf, false, true);
  real("depth_bias");
  require_range("depth_noise", real("depth_noise"), 0.0, kInf, false, true);
  require_range("pixel_noise", real("pixel_noise"), 0.0, kInf, false, true);
  require_range("room_width", real("room_width"), 2.0, kInf, true, true);
  require_range("room_length", real("room_length"), 2.0, kInf, true, true);
  require_range("room_height", real("room_height"), 2.0, kInf, true, true);
  require_range("sigma_d", real("sigma_d"), 0.0, kInf, true, true);
  require_range("sigma_dist", real("sigma_dist"), 0.0, kInf, true, true);
  require_range("learning_rate", real("learning_rate"), 0.0, kInf, true, true);
  require_range("weight_decay", real("weight_decay"), 0.0, kInf, false, true);
  require_range("focal_gamma", real("focal_gamma"), 0.0, kInf, false, true);
  require_range("tau", real("tau"), 0.0, 1.0, false, false);
  require_range("ransac_threshold_px", real("ransac_threshold_px"), 0.0, kInf, true, true);
  require_range("inlier_threshold", real("inlier_threshold"), 0.0, kInf, true, true);
  require_range("rr_threshold", real("rr_threshold"), 0.0, kInf, true, true);

  require_enum(*this, "outlier_mode", {"uniform_resample", "pixel_shuffle"});
  require_enum(*this, "consistency_mode", {"angle", "distance"});
  require_enum(*this, "scale_ratio_direction", {"reciprocal", "literal"});
  require_enum(*this, "cross_theta", {"none", "geometric"});
  require_enum(*this, "loss", {"bce", "focal"});
  require_enum(*this, "ransac_solver", {"dlt6", "p3p"});
  for (const char* key : {"signed_cosine", "scale_alignment", "reweight", "cross_attention", "mask_mode"}) {
    flag(key);
  }

  const auto& taus = get("ablate_taus");
  std::stringstream ss(taus);
  std::string item;
  int count = 0;
  while (std::getline(ss, item, ',')) {
    double t = 0.0;
    item = trim(item);
    const auto res = std::from_chars(item.data(), item.data() + item.size(), t);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size() || !(t > 0.0 && t < 1.0)) {
      throw ConfigError("ablate_taus", "'" + item + "' is not a threshold in (0, 1)");
    }
    ++count;
  }
  if (count == 0) throw ConfigError("ablate_taus", "needs at least one threshold");
}

void RunConfig::write(std::ostream& out) const {
  for (const auto& [key, value] : values_) out << key << " = " << value << '\n';
}

SceneConfig RunConfig::scene() const {
  SceneConfig c;
  c.n_points = static_cast<std::size_t>(integer("n_points"));
  c.depth_scale = real("depth_scale_min");
  c.depth_bias = real("depth_bias");
  c.depth_noise_sigma = real("depth_noise");
  c.pixel_noise_px = real("pixel_noise");
  c.outlier_ratio = real("outlier_ratio");
  c.outlier_mode = parse_outlier_mode(get("outlier_mode"));
  c.room.width = real("room_width");
  c.room.length = real("room_length");
  c.room.height = real("room_height");
  c.room.clutter_boxes = static_cast<int>(integer("clutter_boxes"));
  c.seed = unsigned_integer("seed");
  return c;
}

DatasetConfig RunConfig::dataset() const {
  DatasetConfig c;
  c.base = scene();
  c.n_scenes = static_cast<std::size_t>(integer("scenes"));
  c.seed = unsigned_integer("seed");
  c.scale_min = real("depth_scale_min");
  c.scale_max = real("depth_scale_max");
  return c;
}

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig c;
  c.consistency.mode =
      get("consistency_mode") == "distance" ? ConsistencyMode::kDistance : ConsistencyMode::kAngle;
  c.consistency.sigma_d = real("sigma_d");
  c.consistency.sigma_dist = real("sigma_dist");
  c.consistency.signed_cosine = flag("signed_cosine");
  c.scale_alignment = flag("scale_alignment");
  c.scale_direction = get("scale_ratio_direction") == "literal" ? ScaleRatioDirection::kLiteral
                                                                : ScaleRatioDirection::kReciprocal;
  c.num_nodes = static_cast<std::size_t>(integer("num_nodes"));
  c.k_local = static_cast<std::size_t>(integer("k_local"));
  c.k_global = static_cast<std::size_t>(integer("k_global"));
  c.num_keypoints = static_cast<std::size_t>(integer("num_keypoints"));
  c.normal_k = static_cast<int>(integer("normal_k"));
  c.cross_theta = get("cross_theta") == "geometric";
  c.seed = unsigned_integer("seed");
  return c;
}

net::ModelConfig RunConfig::model() const {
  net::ModelConfig c;
  c.d_model = static_cast<int>(integer("d_model"));
  c.heads = static_cast<int>(integer("heads"));
  c.layers = static_cast<int>(integer("layers"));
  c.head_hidden = static_cast<int>(integer("head_hidden"));
  return c;
}

net::TrainConfig RunConfig::train() const {
  net::TrainConfig c;
  c.learning_rate = real("learning_rate");
  c.weight_decay = real("weight_decay");
  c.epochs = static_cast<int>(integer("epochs"));
  c.batch_size = static_cast<int>(integer("batch_size"));
  c.seed = unsigned_integer("seed");
  c.tau = real("tau");
  c.loss.kind = get("loss") == "focal" ? net::LossKind::kFocal : net::LossKind::kBce;
  c.loss.focal_gamma = real("focal_gamma");
  c.network.reweight = flag("reweight");
  c.network.cross_attention = flag("cross_attention");
  c.network.cross_theta = get("cross_theta") == "geometric";
  c.network.attention.mask_mode = flag("mask_mode");
  return c;
}

EvalThresholds RunConfig::thresholds() const {
  EvalThresholds t;
  t.inlier_threshold = real("inlier_threshold");
  t.registration_threshold = real("rr_threshold");
  t.ransac.iterations = static_cast<int>(integer("ransac_iterations"));
  t.ransac.reprojection_threshold_px = real("ransac_threshold_px");
  t.ransac.solver = get("ransac_solver") == "p3p" ? HypothesisSolver::kP3P : HypothesisSolver::kDlt6;
  t.ransac.seed = unsigned_integer("seed");
  return t;
}

}  // namespace angle_i2p::cli
