#include "revnet/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <thread>

#include "json.hpp"
#include "revnet/errors.hpp"
#include "revnet/metrics.hpp"

namespace revnet {

Var nll_loss(Tape& tape, std::span<const Var> step_log_probs, std::span<const int> target) {
  std::size_t length = 0;
  while (length < target.size() && target[length] != kPad) ++length;
  if (length == 0) throw DataError("nll_loss: empty target");
  if (length > step_log_probs.size()) {
    throw ShapeError("nll_loss: " + std::to_string(length) + " gold tokens but " +
                     std::to_string(step_log_probs.size()) + " distributions");
  }
  std::vector<Var> picked;
  picked.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    picked.push_back(tape.select(step_log_probs[t], target[t]));
  }
  return tape.scale(tape.sum(tape.concat(picked)), -1.0 / static_cast<double>(length));
}

std::vector<int> occurrence_set(std::span<const int> target) {
  std::vector<int> out;
  for (int id : target) {
    if (id >= kNumSpecial) out.push_back(id);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Var disc_loss(Tape& tape, Var pooled_scores, std::span<const int> occurrence, int vocab) {
  const Tensor& s = tape.value(pooled_scores);
  if (s.rank() != 1 || s.extent(0) != vocab) {
    throw ShapeError("disc_loss: scores " + shape_str(s.shape()) + " vs vocab " +
                     std::to_string(vocab));
  }
  for (int id : occurrence) {
    if (id < kNumSpecial || id >= vocab) {
      throw DataError("disc_loss: occurrence id " + std::to_string(id) + " out of range");
    }
  }
  if (occurrence.empty()) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      std::fputs("warning: target with no content words contributes no discriminative loss\n",
                 stderr);
    }
    return tape.scalar(0.0);
  }
  const int negatives = vocab - kNumSpecial - static_cast<int>(occurrence.size());
  if (negatives <= 0) return tape.scalar(0.0);

  Tensor neg_mask({vocab});
  for (int v = kNumSpecial; v < vocab; ++v) neg_mask[v] = 1.0;
  for (int id : occurrence) neg_mask[id] = 0.0;
  Var mask = tape.constant(std::move(neg_mask));

  Var one = tape.scalar(1.0);
  Var acc;
  for (int j : occurrence) {
    Var margin = tape.sub(one, tape.select(pooled_scores, j));
    Var hinges = tape.mul(tape.relu(tape.add_scalar(pooled_scores, margin)), mask);
    Var contrib = tape.sum(hinges);
    acc = acc.valid() ? tape.add(acc, contrib) : contrib;
  }
  const double z = static_cast<double>(occurrence.size()) * static_cast<double>(negatives);
  return tape.scale(acc, 1.0 / z);
}

double total_loss(double nll, double disc, double lambda) { return nll + lambda * disc; }

InstanceLoss instance_loss(Tape& tape, const Model& model, const Instance& inst, double lambda) {
  if (lambda < 0) throw ConfigError("instance_loss: lambda must be nonnegative");
  ThoughtVectors tv = model.forward(tape, inst);
  LstmState state = init_state(tape, tv);
  std::vector<Var> log_probs;
  int prev = kBos;
  for (int id : inst.target) {
    if (id == kPad) break;
    DecodeStep step = decode_step(tape, model.decoder, tv.thoughts, state, prev);
    log_probs.push_back(step.log_probs);
    state = step.state;
    prev = id;
  }

  InstanceLoss out;
  out.nll = nll_loss(tape, log_probs, inst.target);
  const bool use_disc = lambda != 0.0 && model.config.kind == ModelKind::review &&
                        model.config.reviewer.discriminative;
  if (use_disc) {
    Var scores = discriminative_scores(tape, model.reviewer.disc, tv.thoughts);
    out.disc = disc_loss(tape, scores, occurrence_set(inst.target), model.config.vocab);
    out.total = tape.add(out.nll, tape.scale(out.disc, lambda));
  } else {
    out.disc = tape.scalar(0.0);
    out.total = out.nll;
  }
  out.values.nll = tape.value(out.nll).scalar_value();
  out.values.disc = tape.value(out.disc).scalar_value();
  out.values.total = tape.value(out.total).scalar_value();
  out.values.token_count = static_cast<int>(log_probs.size());
  return out;
}

double global_norm(std::span<const Tensor> grads) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (double x : g.values()) sq += x * x;
  }
  return std::sqrt(sq);
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  if (max_norm <= 0) throw ConfigError("clip_global_norm: max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor& g : grads) {
      for (double& x : g.values()) x *= factor;
    }
  }
  return norm;
}

AdaGrad::AdaGrad(ParamRegistry registry, double lr, double eps)
    : registry_(std::move(registry)), lr_(lr), eps_(eps) {
  if (lr_ <= 0) throw ConfigError("adagrad: learning rate must be positive");
  if (eps_ <= 0) throw ConfigError("adagrad: epsilon must be positive");
  accum_.reserve(registry_.size());
  for (const ParamRef& ref : registry_) accum_.emplace_back(ref.tensor->shape());
}

void AdaGrad::step(std::span<const Tensor> grads) {
  if (grads.size() != registry_.size()) {
    throw ShapeError("adagrad: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(registry_.size()) + " parameters");
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (!grads[k].same_shape(*registry_[k].tensor)) {
      throw ShapeError("adagrad: gradient shape mismatch for " + registry_[k].name);
    }
    if (!grads[k].all_finite()) {
      throw NumericError("adagrad: non-finite gradient for " + registry_[k].name);
    }
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    Tensor& g_accum = accum_[k];
    Tensor& param = *registry_[k].tensor;
    const Tensor& g = grads[k];
    for (std::int64_t i = 0; i < g.numel(); ++i) {
      g_accum[i] += g[i] * g[i];
      param[i] -= lr_ * g[i] / (std::sqrt(g_accum[i]) + eps_);
    }
  }
}

namespace {

void accumulate_chunk(Model& model, std::span<const Instance> batch, double lambda,
                      const ParamRegistry& reg, std::size_t begin, std::size_t end,
                      std::vector<Tensor>& sums, LossBreakdown& acc) {
  for (std::size_t i = begin; i < end; ++i) {
    Tape tape(model.config.precision);
    InstanceLoss il = instance_loss(tape, model, batch[i], lambda);
    tape.backward(il.total);
    for (std::size_t k = 0; k < reg.size(); ++k) {
      Tensor g = tape.grad_of(*reg[k].tensor);
      Tensor& sum = sums[k];
      for (std::int64_t j = 0; j < g.numel(); ++j) sum[j] += g[j];
    }
    acc.nll += il.values.nll;
    acc.disc += il.values.disc;
    acc.total += il.values.total;
    acc.token_count += il.values.token_count;
  }
}

}  // namespace

BatchGradients batch_gradients(Model& model, std::span<const Instance> batch, double lambda,
                               int threads) {
  if (batch.empty()) throw DataError("batch_gradients: empty batch");
  if (threads < 1) throw ConfigError("batch_gradients: thread count must be positive");
  ParamRegistry reg = model.registry();

  BatchGradients out;
  out.grads.reserve(reg.size());
  for (const ParamRef& ref : reg) out.grads.emplace_back(ref.tensor->shape());

  const std::size_t n = batch.size();
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  LossBreakdown acc;
  if (workers <= 1) {
    accumulate_chunk(model, batch, lambda, reg, 0, n, out.grads, acc);
  } else {
    std::vector<std::vector<Tensor>> partial_sums(workers);
    std::vector<LossBreakdown> partial_acc(workers);
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      partial_sums[w].reserve(reg.size());
      for (const ParamRef& ref : reg) partial_sums[w].emplace_back(ref.tensor->shape());
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        accumulate_chunk(model, batch, lambda, reg, begin, end, partial_sums[w], partial_acc[w]);
      });
    }
    for (std::thread& t : pool) t.join();
    for (std::size_t w = 0; w < workers; ++w) {
      for (std::size_t k = 0; k < reg.size(); ++k) {
        Tensor& sum = out.grads[k];
        const Tensor& part = partial_sums[w][k];
        for (std::int64_t j = 0; j < part.numel(); ++j) sum[j] += part[j];
      }
      acc.nll += partial_acc[w].nll;
      acc.disc += partial_acc[w].disc;
      acc.total += partial_acc[w].total;
      acc.token_count += partial_acc[w].token_count;
    }
  }

  const double inv = 1.0 / static_cast<double>(n);
  for (Tensor& g : out.grads) {
    for (double& x : g.values()) x *= inv;
  }
  out.mean.nll = acc.nll * inv;
  out.mean.disc = acc.disc * inv;
  out.mean.total = acc.total * inv;
  out.mean.token_count = acc.token_count;
  return out;
}

double dev_bleu4(const Model& model, std::span<const Instance> dev, int max_len) {
  std::vector<std::vector<std::string>> cands;
  std::vector<std::vector<std::string>> refs;
  cands.reserve(dev.size());
  refs.reserve(dev.size());
  for (const Instance& inst : dev) {
    Tape tape(model.config.precision, false);
    ThoughtVectors tv = model.forward(tape, inst);
    std::vector<int> ids = greedy_decode(tape, model.decoder, tv, max_len);
    std::vector<std::string> cand;
    for (int id : ids) cand.push_back(std::to_string(id));
    cands.push_back(std::move(cand));
    std::vector<std::string> ref;
    for (int id : inst.target) {
      if (id == kEos || id == kPad) break;
      ref.push_back(std::to_string(id));
    }
    refs.push_back(std::move(ref));
  }
  return bleu4(cands, refs, true).bleu;
}

double dev_metric_value(const Model& model, std::span<const Instance> dev, DevMetric metric,
                        int max_len) {
  switch (metric) {
    case DevMetric::token_nll:
      return mean_token_nll(model, dev);
    case DevMetric::bleu4:
      return dev_bleu4(model, dev, max_len);
    case DevMetric::none:
      break;
  }
  throw ConfigError("dev_metric_value: no metric configured");
}

namespace {

bool improves(DevMetric metric, double value, double best) {
  return metric == DevMetric::token_nll ? value < best : value > best;
}

void log_record(std::ostream* log, int epoch, std::int64_t step, const LossBreakdown& loss,
                const double* dev_value) {
  if (!log) return;
  nlohmann::json j;
  j["epoch"] = epoch;
  j["step"] = step;
  j["nll"] = loss.nll;
  j["disc"] = loss.disc;
  j["total"] = loss.total;
  if (dev_value) {
    j["dev_metric"] = *dev_value;
  } else {
    j["dev_metric"] = nullptr;
  }
  (*log) << j.dump() << "\n";
}

std::vector<Tensor> snapshot_params(const ParamRegistry& reg) {
  std::vector<Tensor> out;
  out.reserve(reg.size());
  for (const ParamRef& ref : reg) out.push_back(*ref.tensor);
  return out;
}

void restore_params(const ParamRegistry& reg, const std::vector<Tensor>& snap) {
  for (std::size_t k = 0; k < reg.size(); ++k) *reg[k].tensor = snap[k];
}

}  // namespace

FitResult fit(Model& model, std::span<const Instance> train, std::span<const Instance> dev,
              const TrainConfig& cfg, std::ostream* log) {
  if (train.empty()) throw DataError("fit: empty training split");
  if (cfg.dev_metric != DevMetric::none && dev.empty()) {
    throw DataError("fit: dev metric configured but the dev split is empty");
  }
  if (cfg.lambda < 0) throw ConfigError("fit: lambda must be nonnegative");
  if (cfg.batch_size < 1) throw ConfigError("fit: batch size must be positive");
  if (cfg.max_epochs < 1) throw ConfigError("fit: max epochs must be positive");
  if (cfg.patience < 0) throw ConfigError("fit: patience must be nonnegative");

  ParamRegistry reg = model.registry();
  AdaGrad opt(reg, cfg.lr, cfg.eps);
  Rng rng(cfg.seed);

  FitResult result;
  std::vector<Tensor> best;
  double best_metric = 0.0;
  int bad_epochs = 0;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  bool out_of_steps = false;
  for (int epoch = 0; epoch < cfg.max_epochs && !out_of_steps; ++epoch) {
    rng.shuffle(order);
    std::vector<Instance> shuffled;
    shuffled.reserve(train.size());
    for (std::size_t i : order) shuffled.push_back(train[i]);

    LossBreakdown epoch_acc;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < shuffled.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(shuffled.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      std::span<const Instance> batch(shuffled.data() + begin, end - begin);
      try {
        BatchGradients bg = batch_gradients(model, batch, cfg.lambda, cfg.threads);
        if (cfg.clip_norm > 0) clip_global_norm(bg.grads, cfg.clip_norm);
        opt.step(bg.grads);
        ++result.steps;
        log_record(log, epoch, result.steps, bg.mean, nullptr);
        epoch_acc.nll += bg.mean.nll;
        epoch_acc.disc += bg.mean.disc;
        epoch_acc.total += bg.mean.total;
        epoch_acc.token_count += bg.mean.token_count;
        ++batches;
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " step " +
                           std::to_string(result.steps + 1) + ": " + e.what());
      }
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) {
        out_of_steps = true;
        break;
      }
    }
    result.epochs = epoch + 1;
    if (batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      epoch_acc.nll *= inv;
      epoch_acc.disc *= inv;
      epoch_acc.total *= inv;
    }
    result.last = epoch_acc;

    if (cfg.dev_metric == DevMetric::none) {
      log_record(log, epoch, result.steps, epoch_acc, nullptr);
      continue;
    }
    const double value = dev_metric_value(model, dev, cfg.dev_metric, cfg.gen_max_len);
    log_record(log, epoch, result.steps, epoch_acc, &value);
    if (best.empty() || improves(cfg.dev_metric, value, best_metric)) {
      best = snapshot_params(reg);
      best_metric = value;
      result.best_epoch = epoch;
      result.best_metric = value;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs > cfg.patience) break;
    }
  }

  if (!best.empty()) restore_params(reg, best);
  return result;
}

}  // namespace revnet
