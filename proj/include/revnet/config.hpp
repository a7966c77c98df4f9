#pragma once

#include <cstdint>
#include <string>

#include "revnet/model.hpp"
#include "revnet/training.hpp"

namespace revnet {

// Everything one run needs: task, paths, model shape, corpus handling,
// optimization, and decoding. Serializes to a flat JSON object; loading
// rejects unknown keys and round-trips every field losslessly.
struct RunConfig {
  TaskKind task = TaskKind::caption;

  std::string train_path = "train.jsonl";
  std::string dev_path = "dev.jsonl";
  std::string test_path = "test.jsonl";
  std::string vocab_path = "vocab.tsv";
  std::string checkpoint_path = "model.ckpt";
  std::string log_path = "train.log";
  std::string features_dir;

  ModelKind model = ModelKind::review;
  EncoderKind encoder = EncoderKind::rnn;
  ReviewerVariant variant = ReviewerVariant::attentive_input;
  int review_steps = 8;
  WeightTying tying = WeightTying::tied;
  bool discriminative = true;
  ScorerKind scorer = ScorerKind::mlp;
  int mlp_hidden = 512;
  int embed_dim = 100;
  int hidden_dim = 1024;
  int grid_dim = 0;
  int grid_context_dim = 0;
  Precision precision = Precision::f64;
  double init_scale = 0.08;

  int vocab_threshold = 5;
  int source_cap = 300;
  int target_cap = 30;
  double test_frac = 0.1;
  double dev_frac = 0.1;

  double lambda = 10.0;
  double lr = 1e-2;
  double eps = 1e-8;
  double clip_norm = 5.0;
  int batch_size = 32;
  int max_epochs = 50;
  std::int64_t max_steps = 0;
  int patience = 0;
  DevMetric dev_metric = DevMetric::bleu4;
  std::uint64_t seed = 1;
  int threads = 1;

  int beam = 3;
  int max_len = 30;
  bool length_normalize = false;

  bool operator==(const RunConfig&) const = default;
};

// Caption runs keep the struct defaults; code runs get the smaller embedding
// and hidden sizes and score the dev split by per-token NLL.
RunConfig default_run_config(TaskKind task);

RunConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const RunConfig& cfg);

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& cfg);

ModelConfig model_config(const RunConfig& cfg, int vocab_size);
TrainConfig train_config(const RunConfig& cfg);
Caps config_caps(const RunConfig& cfg);
SplitSpec config_split(const RunConfig& cfg);

}  // namespace revnet
