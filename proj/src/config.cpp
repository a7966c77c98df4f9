#include "revnet/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "revnet/errors.hpp"

namespace revnet {

namespace {

using nlohmann::json;

template <class T>
struct EnumName {
  T value;
  const char* name;
};

constexpr EnumName<TaskKind> kTasks[] = {{TaskKind::caption, "caption"}, {TaskKind::code, "code"}};
constexpr EnumName<ModelKind> kModels[] = {{ModelKind::review, "review"},
                                           {ModelKind::encdec_attn, "encdec_attn"},
                                           {ModelKind::encdec, "encdec"}};
constexpr EnumName<EncoderKind> kEncoders[] = {{EncoderKind::rnn, "rnn"},
                                               {EncoderKind::bidir, "bidir"},
                                               {EncoderKind::grid, "grid"}};
constexpr EnumName<ReviewerVariant> kVariants[] = {
    {ReviewerVariant::attentive_input, "attentive_input"},
    {ReviewerVariant::attentive_output, "attentive_output"},
    {ReviewerVariant::identity_reduction, "identity_reduction"}};
constexpr EnumName<WeightTying> kTyings[] = {{WeightTying::tied, "tied"},
                                             {WeightTying::untied, "untied"}};
constexpr EnumName<ScorerKind> kScorers[] = {{ScorerKind::dot, "dot"}, {ScorerKind::mlp, "mlp"}};
constexpr EnumName<Precision> kPrecisions[] = {{Precision::f64, "f64"}, {Precision::f32, "f32"}};
constexpr EnumName<DevMetric> kDevMetrics[] = {{DevMetric::none, "none"},
                                               {DevMetric::token_nll, "token_nll"},
                                               {DevMetric::bleu4, "bleu4"}};

template <class T, std::size_t N>
const char* enum_name(const EnumName<T> (&table)[N], T value) {
  for (const auto& entry : table) {
    if (entry.value == value) return entry.name;
  }
  throw ConfigError("unmapped enum value");
}

template <class T, std::size_t N>
T enum_value(const EnumName<T> (&table)[N], const std::string& key, const json& j) {
  if (!j.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  const std::string name = j.get<std::string>();
  for (const auto& entry : table) {
    if (name == entry.name) return entry.value;
  }
  throw ConfigError("config key '" + key + "': unknown value '" + name + "'");
}

template <class T>
T number(const std::string& key, const json& j) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!j.is_boolean()) throw ConfigError("config key '" + key + "' must be a boolean");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!j.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  } else {
    if (!j.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
  }
  return j.get<T>();
}

std::string text(const std::string& key, const json& j) {
  if (!j.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return j.get<std::string>();
}

}  // namespace

RunConfig default_run_config(TaskKind task) {
  RunConfig cfg;
  cfg.task = task;
  if (task == TaskKind::code) {
    cfg.embed_dim = 50;
    cfg.hidden_dim = 256;
    cfg.dev_metric = DevMetric::token_nll;
  }
  return cfg;
}

std::string config_to_json_text(const RunConfig& c) {
  json j;
  j["task"] = enum_name(kTasks, c.task);
  j["train_path"] = c.train_path;
  j["dev_path"] = c.dev_path;
  j["test_path"] = c.test_path;
  j["vocab_path"] = c.vocab_path;
  j["checkpoint_path"] = c.checkpoint_path;
  j["log_path"] = c.log_path;
  j["features_dir"] = c.features_dir;
  j["model"] = enum_name(kModels, c.model);
  j["encoder"] = enum_name(kEncoders, c.encoder);
  j["variant"] = enum_name(kVariants, c.variant);
  j["review_steps"] = c.review_steps;
  j["tying"] = enum_name(kTyings, c.tying);
  j["discriminative"] = c.discriminative;
  j["scorer"] = enum_name(kScorers, c.scorer);
  j["mlp_hidden"] = c.mlp_hidden;
  j["embed_dim"] = c.embed_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["grid_dim"] = c.grid_dim;
  j["grid_context_dim"] = c.grid_context_dim;
  j["precision"] = enum_name(kPrecisions, c.precision);
  j["init_scale"] = c.init_scale;
  j["vocab_threshold"] = c.vocab_threshold;
  j["source_cap"] = c.source_cap;
  j["target_cap"] = c.target_cap;
  j["test_frac"] = c.test_frac;
  j["dev_frac"] = c.dev_frac;
  j["lambda"] = c.lambda;
  j["lr"] = c.lr;
  j["eps"] = c.eps;
  j["clip_norm"] = c.clip_norm;
  j["batch_size"] = c.batch_size;
  j["max_epochs"] = c.max_epochs;
  j["max_steps"] = c.max_steps;
  j["patience"] = c.patience;
  j["dev_metric"] = enum_name(kDevMetrics, c.dev_metric);
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["beam"] = c.beam;
  j["max_len"] = c.max_len;
  j["length_normalize"] = c.length_normalize;
  return j.dump(2) + "\n";
}

RunConfig config_from_json_text(const std::string& content) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  RunConfig c;
  bool saw_task = false;
  if (auto it = j.find("task"); it != j.end()) {
    c = default_run_config(enum_value(kTasks, "task", *it));
    saw_task = true;
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "task") {
      if (!saw_task) c.task = enum_value(kTasks, key, value);
    } else if (key == "train_path") {
      c.train_path = text(key, value);
    } else if (key == "dev_path") {
      c.dev_path = text(key, value);
    } else if (key == "test_path") {
      c.test_path = text(key, value);
    } else if (key == "vocab_path") {
      c.vocab_path = text(key, value);
    } else if (key == "checkpoint_path") {
      c.checkpoint_path = text(key, value);
    } else if (key == "log_path") {
      c.log_path = text(key, value);
    } else if (key == "features_dir") {
      c.features_dir = text(key, value);
    } else if (key == "model") {
      c.model = enum_value(kModels, key, value);
    } else if (key == "encoder") {
      c.encoder = enum_value(kEncoders, key, value);
    } else if (key == "variant") {
      c.variant = enum_value(kVariants, key, value);
    } else if (key == "review_steps") {
      c.review_steps = number<int>(key, value);
    } else if (key == "tying") {
      c.tying = enum_value(kTyings, key, value);
    } else if (key == "discriminative") {
      c.discriminative = number<bool>(key, value);
    } else if (key == "scorer") {
      c.scorer = enum_value(kScorers, key, value);
    } else if (key == "mlp_hidden") {
      c.mlp_hidden = number<int>(key, value);
    } else if (key == "embed_dim") {
      c.embed_dim = number<int>(key, value);
    } else if (key == "hidden_dim") {
      c.hidden_dim = number<int>(key, value);
    } else if (key == "grid_dim") {
      c.grid_dim = number<int>(key, value);
    } else if (key == "grid_context_dim") {
      c.grid_context_dim = number<int>(key, value);
    } else if (key == "precision") {
      c.precision = enum_value(kPrecisions, key, value);
    } else if (key == "init_scale") {
      c.init_scale = number<double>(key, value);
    } else if (key == "vocab_threshold") {
      c.vocab_threshold = number<int>(key, value);
    } else if (key == "source_cap") {
      c.source_cap = number<int>(key, value);
    } else if (key == "target_cap") {
      c.target_cap = number<int>(key, value);
    } else if (key == "test_frac") {
      c.test_frac = number<double>(key, value);
    } else if (key == "dev_frac") {
      c.dev_frac = number<double>(key, value);
    } else if (key == "lambda") {
      c.lambda = number<double>(key, value);
    } else if (key == "lr") {
      c.lr = number<double>(key, value);
    } else if (key == "eps") {
      c.eps = number<double>(key, value);
    } else if (key == "clip_norm") {
      c.clip_norm = number<double>(key, value);
    } else if (key == "batch_size") {
      c.batch_size = number<int>(key, value);
    } else if (key == "max_epochs") {
      c.max_epochs = number<int>(key, value);
    } else if (key == "max_steps") {
      c.max_steps = number<std::int64_t>(key, value);
    } else if (key == "patience") {
      c.patience = number<int>(key, value);
    } else if (key == "dev_metric") {
      c.dev_metric = enum_value(kDevMetrics, key, value);
    } else if (key == "seed") {
      c.seed = number<std::uint64_t>(key, value);
    } else if (key == "threads") {
      c.threads = number<int>(key, value);
    } else if (key == "beam") {
      c.beam = number<int>(key, value);
    } else if (key == "max_len") {
      c.max_len = number<int>(key, value);
    } else if (key == "length_normalize") {
      c.length_normalize = number<bool>(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write config: " + path);
  out << config_to_json_text(cfg);
  if (!out) throw DataError("write failed: " + path);
}

ModelConfig model_config(const RunConfig& c, int vocab_size) {
  ModelConfig m;
  m.kind = c.model;
  m.encoder = c.encoder;
  m.reviewer.variant = c.variant;
  m.reviewer.steps = c.review_steps;
  m.reviewer.tying = c.tying;
  m.reviewer.discriminative = c.discriminative;
  m.vocab = vocab_size;
  m.embed_dim = c.embed_dim;
  m.hidden_dim = c.hidden_dim;
  m.scorer = c.scorer;
  m.mlp_hidden = c.mlp_hidden;
  m.grid_dim = c.grid_dim;
  m.grid_context_dim = c.grid_context_dim;
  m.precision = c.precision;
  return m;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.lambda = c.lambda;
  t.lr = c.lr;
  t.eps = c.eps;
  t.clip_norm = c.clip_norm;
  t.batch_size = c.batch_size;
  t.max_epochs = c.max_epochs;
  t.max_steps = c.max_steps;
  t.patience = c.patience;
  t.dev_metric = c.dev_metric;
  t.seed = c.seed;
  t.threads = c.threads;
  t.gen_max_len = c.max_len;
  return t;
}

Caps config_caps(const RunConfig& c) { return Caps{c.source_cap, c.target_cap}; }

SplitSpec config_split(const RunConfig& c) { return SplitSpec{c.test_frac, c.dev_frac, c.seed}; }

}  // namespace revnet
