#include "angle_i2p/net/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "angle_i2p/correspondence_io.hpp"

namespace angle_i2p::net {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw DomainError("train: learning_rate must be positive");
  if (weight_decay < 0.0) throw DomainError("train: weight_decay must be non-negative");
  if (epochs < 0) throw DomainError("train: epochs must be non-negative");
  if (batch_size < 1) throw DomainError("train: batch_size must be at least 1");
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("train: tau must lie in (0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw DomainError("train: invalid moment parameters");
  }
}

AdamW::AdamW(const Model& model, const TrainConfig& config)
    : lr_(config.learning_rate),
      wd_(config.weight_decay),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.epsilon),
      first_moment_(model.zeros_like()),
      second_moment_(model.zeros_like()) {}

void AdamW::step(Model& model, const Model& grad) {
  ++step_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  std::vector<Tensor*> params;
  std::vector<const Tensor*> grads;
  std::vector<Tensor*> m1;
  std::vector<Tensor*> m2;
  model.for_each([&](const std::string&, Tensor& t) { params.push_back(&t); });
  grad.for_each([&](const std::string&, const Tensor& t) { grads.push_back(&t); });
  first_moment_.for_each([&](const std::string&, Tensor& t) { m1.push_back(&t); });
  second_moment_.for_each([&](const std::string&, Tensor& t) { m2.push_back(&t); });
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& g = *grads[i];
    auto& m = *m1[i];
    auto& v = *m2[i];
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    p.array() -= lr_ * ((m.array() / correction1) / ((v.array() / correction2).sqrt() + eps_) +
                        wd_ * p.array());
  }
}

double filtered_inlier_ratio(const Model& model, std::span<const Sample> samples, double tau,
                             const NetworkOptions& options) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  for (const auto& s : samples) {
    if (s.labels.size() != s.size()) throw DomainError("filtered_inlier_ratio: sample lacks labels");
    const auto scores = predict(model, s, options);
    std::size_t kept = 0;
    std::size_t inliers = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= tau) {
        ++kept;
        if (s.labels[i]) ++inliers;
      }
    }
    sum += kept ? static_cast<double>(inliers) / static_cast<double>(kept) : 0.0;
  }
  return sum / static_cast<double>(samples.size());
}

TrainHistory train(Model& model, std::span<const Sample> train_set,
                   std::span<const Sample> val_set, const TrainConfig& config,
                   const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  TrainHistory history;
  if (config.epochs == 0) return history;
  if (train_set.empty()) throw DomainError("train: empty training set");

  AdamW optimizer(model, config);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      LossAndGrad lg;
      lg.grad = model.zeros_like();
      for (std::size_t b = start; b < end; ++b) {
        auto one = loss_and_grad(model, train_set[order[b]], config.loss, config.network);
        lg.loss += one.loss;
        accumulate(lg.grad, one.grad);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      lg.loss *= inv;
      lg.grad.for_each([&](const std::string&, Tensor& t) { t *= inv; });
      if (!std::isfinite(lg.loss) || !lg.grad.all_finite()) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batches) + ": loss = " + format_real(lg.loss));
      }
      optimizer.step(model, lg.grad);
      loss_sum += lg.loss;
      ++batches;
    }
    if (!model.all_finite()) {
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                             ": non-finite parameters");
    }
    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss_sum / static_cast<double>(batches);
    record.val_ir = filtered_inlier_ratio(model, val_set, config.tau, config.network);
    history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return history;
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  out << "epoch,loss,val_ir\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << format_real(e.loss) << ','
        << (std::isnan(e.val_ir) ? std::string("nan") : format_real(e.val_ir)) << '\n';
  }
}

}  // namespace angle_i2p::net
