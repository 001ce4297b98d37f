#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "angle_i2p/net/train.hpp"
#include "angle_i2p/pipeline.hpp"
#include "angle_i2p/pose_eval.hpp"
#include "angle_i2p/synth.hpp"

namespace angle_i2p::cli {

/// A rejected configuration value; `key` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error("invalid config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct KeySpec {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every setting of every command as text, checked and converted on demand.
/// Precedence is whatever order set() is called in: defaults, then the
/// config file, then flags.
class RunConfig {
 public:
  RunConfig();

  static const std::vector<KeySpec>& keys();

  void set(const std::string& key, const std::string& value);
  /// `key = value` lines; blank lines and `#` comments are skipped.
  void load(std::istream& in, const std::string& source = "config");
  void load_file(const std::filesystem::path& path);

  const std::string& get(const std::string& key) const;
  double real(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::uint64_t unsigned_integer(const std::string& key) const;
  bool flag(const std::string& key) const;

  /// Parses and range-checks every key. Throws ConfigError.
  void validate() const;

  /// Sorted `key = value` lines.
  void write(std::ostream& out) const;

  SceneConfig scene() const;
  DatasetConfig dataset() const;
  PipelineConfig pipeline() const;
  net::ModelConfig model() const;
  net::TrainConfig train() const;
  EvalThresholds thresholds() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace angle_i2p::cli
