#include "cli.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <streambuf>

#include <CLI11.hpp>

#include "commands.hpp"

namespace angle_i2p::cli {
namespace {

// Writes every character to two buffers: the run's log file and the console.
class TeeBuf : public std::streambuf {
 public:
  TeeBuf(std::streambuf* a, std::streambuf* b) : a_(a), b_(b) {}

 protected:
  int overflow(int ch) override {
    if (ch == traits_type::eof()) return traits_type::not_eof(ch);
    const auto c = traits_type::to_char_type(ch);
    if (a_->sputc(c) == traits_type::eof() || b_->sputc(c) == traits_type::eof()) {
      return traits_type::eof();
    }
    return ch;
  }
  int sync() override { return (a_->pubsync() == 0 && b_->pubsync() == 0) ? 0 : -1; }

 private:
  std::streambuf* a_;
  std::streambuf* b_;
};

std::string default_out_dir(const std::string& command, const std::string& seed) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream name;
  name << command << '_' << std::put_time(&tm, "%Y%m%d-%H%M%S") << '_' << seed;
  return name.str();
}

const std::map<std::string, std::function<int(Context&)>>& commands() {
  static const std::map<std::string, std::function<int(Context&)>> table = {
      {"generate", cmd_generate}, {"train", cmd_train},     {"filter", cmd_filter},
      {"evaluate", cmd_evaluate}, {"ablate", cmd_ablate},   {"selftest", cmd_selftest},
  };
  return table;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Angle-consistency outlier rejection for image-to-point-cloud correspondences",
               "angle_i2p"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  // Flags are kept as text so the echoed config shows exactly what was given.
  std::vector<std::pair<std::string, std::string>> overrides;
  std::map<std::string, std::string> values;
  const std::vector<std::pair<const char*, const char*>> valued = {
      {"--seed", "seed"},         {"--tau", "tau"},
      {"--sigma-d", "sigma_d"},   {"--mode", "consistency_mode"},
      {"--ransac-iters", "ransac_iterations"},
      {"--scenes", "scenes"},     {"--outlier-ratio", "outlier_ratio"},
      {"--data", "data"},         {"--model", "model"},
      {"--input", "input"},       {"--epochs", "epochs"},
  };
  std::vector<std::string> sets;
  bool no_reweight = false, no_cross = false, no_scale = false;

  for (const auto& [name, key] : commands()) {
    auto* sub = app.add_subcommand(name);
    sub->fallthrough();
  }
  app.get_subcommand("generate")->description("synthesize a dataset and its manifest");
  app.get_subcommand("train")->description("train the classifier on a dataset");
  app.get_subcommand("filter")->description("score and filter correspondences with a model");
  app.get_subcommand("evaluate")->description("PnP-RANSAC metrics, optionally after filtering");
  app.get_subcommand("ablate")->description("train and evaluate the ablation grid");
  app.get_subcommand("selftest")->description("check core invariants against scalar references");

  app.add_option("--config", config_path, "key = value config file");
  app.add_option("--out", out_dir, "output directory (default: <command>_<time>_<seed>)");
  for (const auto& [flag, key] : valued) {
    app.add_option(flag, values[key], std::string("sets ") + key);
  }
  app.add_option("--set", sets, "any config key, as key=value (repeatable)");
  app.add_flag("--no-reweight", no_reweight, "plain attention in the self-attention layers");
  app.add_flag("--no-cross-attention", no_cross, "skip the cross-attention sub-layers");
  app.add_flag("--no-scale-alignment", no_scale, "do not rescale the estimated cloud");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code != 0) err << app.help();
    return code == 0 ? 0 : 2;
  }

  std::string command;
  for (const auto* sub : app.get_subcommands()) command = sub->get_name();

  RunConfig config;
  try {
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(s, "--set expects key=value");
      config.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [flag, key] : valued) {
      if (app.count(flag) > 0) config.set(key, values[key]);
    }
    if (no_reweight) config.set("reweight", "false");
    if (no_cross) config.set("cross_attention", "false");
    if (no_scale) config.set("scale_alignment", "false");
    config.validate();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  const std::filesystem::path dir =
      out_dir.empty() ? default_out_dir(command, config.get("seed")) : out_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    err << "error: cannot create output directory " << dir.string() << ": " << ec.message() << '\n';
    return 1;
  }
  {
    std::ofstream echo(dir / "config.txt", std::ios::binary);
    config.write(echo);
  }
  std::ofstream log_file(dir / "log.txt", std::ios::binary);
  TeeBuf tee(log_file.rdbuf(), out.rdbuf());
  std::ostream log(&tee);
  log << "command " << command << '\n';

  Context ctx{config, dir, log};
  try {
    const int status = commands().at(command)(ctx);
    log.flush();
    return status;
  } catch (const ConfigError& e) {
    log.flush();
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    log.flush();
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace angle_i2p::cli
