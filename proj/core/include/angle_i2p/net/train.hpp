#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "angle_i2p/net/network.hpp"

namespace angle_i2p::net {

struct TrainConfig {
  double learning_rate = 1e-4;
  double weight_decay = 1e-6;
  int epochs = 10;
  int batch_size = 1;
  std::uint64_t seed = 0;
  double tau = 0.2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool shuffle = true;
  LossOptions loss;
  NetworkOptions network;

  void validate() const;
};

/// Adaptive-moment descent with decoupled weight decay.
class AdamW {
 public:
  AdamW(const Model& model, const TrainConfig& config);

  /// One update with `grad` (same shapes as the model).
  void step(Model& model, const Model& grad);
  long steps() const { return step_; }

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  long step_ = 0;
  Model first_moment_;
  Model second_moment_;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_ir = 0.0;  // NaN when there is no validation data
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

/// Raised when the loss stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean over samples of the inlier fraction among correspondences scoring
/// >= tau. A sample that retains nothing contributes 0.
double filtered_inlier_ratio(const Model& model, std::span<const Sample> samples, double tau,
                             const NetworkOptions& options = {});

/// Trains in place. Deterministic for a given seed; shuffling uses a
/// per-epoch permutation drawn from it.
TrainHistory train(Model& model, std::span<const Sample> train_set,
                   std::span<const Sample> val_set, const TrainConfig& config,
                   const std::function<void(const EpochRecord&)>& on_epoch = {});

/// CSV with header `epoch,loss,val_ir`.
void write_history_csv(std::ostream& out, const TrainHistory& history);

}  // namespace angle_i2p::net
