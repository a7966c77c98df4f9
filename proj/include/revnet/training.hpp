#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "revnet/model.hpp"

namespace revnet {

struct LossBreakdown {
  double nll = 0.0;
  double disc = 0.0;
  double total = 0.0;
  int token_count = 0;
};

// Mean negative log-probability of the gold tokens. step_log_probs[t] is the
// full log-distribution at step t; positions at and after the first <pad> are
// dropped.
Var nll_loss(Tape& tape, std::span<const Var> step_log_probs, std::span<const int> target);

// Sorted unique non-special ids appearing in the target.
std::vector<int> occurrence_set(std::span<const int> target);

// Margin loss over pooled scores: (1/Z) sum_{j in W} sum_{i in negatives}
// max(0, 1 - (s_j - s_i)), negatives = non-special vocab outside W,
// Z = |W| * |negatives|. Empty W contributes 0 with a one-time warning.
Var disc_loss(Tape& tape, Var pooled_scores, std::span<const int> occurrence, int vocab);

double total_loss(double nll, double disc, double lambda);

struct InstanceLoss {
  Var nll;
  Var disc;
  Var total;
  LossBreakdown values;
};

// Teacher-forced loss of one instance: NLL plus lambda times the margin loss
// when the model carries a discriminative head and lambda is nonzero.
InstanceLoss instance_loss(Tape& tape, const Model& model, const Instance& inst, double lambda);

double global_norm(std::span<const Tensor> grads);
// Rescales in place when the global norm exceeds max_norm; returns the
// pre-clip norm.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

class AdaGrad {
 public:
  AdaGrad(ParamRegistry registry, double lr, double eps = 1e-8);

  // G += g^2, then param -= lr * g / (sqrt(G) + eps). A non-finite gradient
  // aborts before any parameter changes.
  void step(std::span<const Tensor> grads);

  const ParamRegistry& registry() const { return registry_; }
  std::vector<Tensor>& accumulators() { return accum_; }
  const std::vector<Tensor>& accumulators() const { return accum_; }
  double lr() const { return lr_; }
  double eps() const { return eps_; }

 private:
  ParamRegistry registry_;
  std::vector<Tensor> accum_;
  double lr_ = 0.0;
  double eps_ = 1e-8;
};

struct BatchGradients {
  std::vector<Tensor> grads;
  LossBreakdown mean;
};

// Average of per-instance gradients in registry order. Instances may be
// processed on separate threads; partial sums merge in chunk order so the
// result is deterministic for a fixed thread count.
BatchGradients batch_gradients(Model& model, std::span<const Instance> batch, double lambda,
                               int threads = 1);

enum class DevMetric { none, token_nll, bleu4 };

struct TrainConfig {
  double lambda = 10.0;
  double lr = 1e-2;
  double eps = 1e-8;
  double clip_norm = 5.0;
  int batch_size = 32;
  int max_epochs = 50;
  std::int64_t max_steps = 0;
  int patience = 0;
  DevMetric dev_metric = DevMetric::none;
  std::uint64_t seed = 1;
  int threads = 1;
  int gen_max_len = 30;
};

struct FitResult {
  int epochs = 0;
  std::int64_t steps = 0;
  int best_epoch = -1;
  double best_metric = 0.0;
  LossBreakdown last;
};

// Corpus BLEU-4 (smoothed) of greedy decodes against the gold targets, both
// rendered as token-id strings.
double dev_bleu4(const Model& model, std::span<const Instance> dev, int max_len);

double dev_metric_value(const Model& model, std::span<const Instance> dev, DevMetric metric,
                        int max_len);

// Mini-batch AdaGrad with a fresh shuffle per epoch. Writes one JSON line per
// batch (dev_metric null) and one per epoch (dev_metric filled when a metric
// is configured). Early-stops once the dev metric fails to improve for more
// than `patience` consecutive epochs and restores the best parameters.
FitResult fit(Model& model, std::span<const Instance> train, std::span<const Instance> dev,
              const TrainConfig& cfg, std::ostream* log = nullptr);

}  // namespace revnet
