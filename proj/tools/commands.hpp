#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace angle_i2p::cli {

/// Everything a command needs: its validated configuration, the run
/// directory (already created, config echoed) and a log sink that mirrors
/// into <out>/log.txt.
struct Context {
  RunConfig config;
  std::filesystem::path out_dir;
  std::ostream& log;
};

int cmd_generate(Context& ctx);
int cmd_train(Context& ctx);
int cmd_filter(Context& ctx);
int cmd_evaluate(Context& ctx);
int cmd_ablate(Context& ctx);
int cmd_selftest(Context& ctx);

/// RANSAC seed for the scene at `index` of a run seeded with `seed`.
std::uint64_t scene_ransac_seed(std::uint64_t seed, std::size_t index);

}  // namespace angle_i2p::cli
