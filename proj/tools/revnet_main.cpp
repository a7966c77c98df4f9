#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "revnet/checkpoint.hpp"
#include "revnet/decoder.hpp"
#include "revnet/errors.hpp"
#include "revnet/metrics.hpp"
#include "revnet/synthetic.hpp"

namespace {

using nlohmann::json;
using namespace revnet;

std::ostream& open_sink(const std::string& out_path, std::ofstream& file) {
  if (out_path.empty()) return std::cout;
  file.open(out_path, std::ios::trunc);
  if (!file) throw DataError("cannot open " + out_path + " for writing");
  return file;
}

// Inline text and JSONL inputs both pass through the task tokenizer, so raw
// and preprocessed sources are accepted interchangeably.
std::vector<RawInstance> gather_inputs(const std::string& source, const std::string& input_path,
                                       TaskKind task) {
  std::vector<RawInstance> raws;
  if (!source.empty()) {
    RawInstance r;
    r.source = source;
    raws.push_back(std::move(r));
  } else if (!input_path.empty()) {
    raws = load_jsonl(input_path);
  } else {
    throw ConfigError("provide --source or --input");
  }
  if (raws.empty()) throw DataError("no input instances");
  for (RawInstance& r : raws) r = tokenize_instance(r, task);
  return raws;
}

std::vector<int> best_decode(const Model& model, const Instance& inst, const BeamOptions& opt) {
  Tape tape(model.config.precision, false);
  ThoughtVectors tv = model.forward(tape, inst);
  return beam_search(tape, model.decoder, tv, opt).front().surface();
}

int run_preprocess(const std::string& config_path, const std::string& input_path) {
  RunConfig cfg = load_run_config(config_path);
  std::vector<RawInstance> raw = load_jsonl(input_path);
  if (raw.empty()) throw DataError("empty corpus: " + input_path);

  std::vector<RawInstance> tokenized;
  tokenized.reserve(raw.size());
  for (const RawInstance& r : raw) tokenized.push_back(tokenize_instance(r, cfg.task));

  RawSplits splits = split_corpus(tokenized, config_split(cfg));
  if (splits.train.empty()) throw DataError("split left no training instances");
  Vocab vocab = Vocab::build(collect_token_docs(splits.train), cfg.vocab_threshold);

  save_jsonl(cfg.train_path, splits.train);
  save_jsonl(cfg.dev_path, splits.dev);
  save_jsonl(cfg.test_path, splits.test);
  vocab.save(cfg.vocab_path);

  std::int64_t source_tokens = 0;
  std::int64_t target_tokens = 0;
  for (const RawInstance& r : splits.train) {
    source_tokens += static_cast<std::int64_t>(split_words(r.source).size());
    target_tokens += static_cast<std::int64_t>(split_words(r.target).size());
  }
  std::cout << "instances: " << tokenized.size() << " (train " << splits.train.size() << ", dev "
            << splits.dev.size() << ", test " << splits.test.size() << ")\n";
  std::cout << "vocab size: " << vocab.size() << " (threshold " << cfg.vocab_threshold << ")\n";
  std::cout << "train tokens: " << source_tokens << " source, " << target_tokens << " target\n";
  return 0;
}

int run_train(const std::string& config_path, std::optional<std::uint64_t> seed) {
  RunConfig cfg = load_run_config(config_path);
  if (seed) cfg.seed = *seed;

  Vocab vocab = Vocab::load(cfg.vocab_path);
  std::vector<RawInstance> train_raw = load_jsonl(cfg.train_path);
  std::vector<RawInstance> dev_raw;
  if (std::filesystem::exists(cfg.dev_path)) {
    dev_raw = load_jsonl(cfg.dev_path);
  } else if (train_config(cfg).dev_metric != DevMetric::none) {
    throw DataError("dev split required by dev_metric: " + cfg.dev_path);
  }

  Caps caps = config_caps(cfg);
  std::vector<Instance> train = encode_corpus(vocab, train_raw, caps, cfg.features_dir);
  std::vector<Instance> dev = encode_corpus(vocab, dev_raw, caps, cfg.features_dir);

  Model model(model_config(cfg, vocab.size()));
  Rng rng(cfg.seed);
  model.init(rng, cfg.init_scale);

  std::ofstream log(cfg.log_path, std::ios::trunc);
  if (!log) throw DataError("cannot open " + cfg.log_path + " for writing");
  FitResult result = fit(model, train, dev, train_config(cfg), &log);

  save_checkpoint(cfg.checkpoint_path, cfg, vocab, model);
  std::cout << "trained " << result.epochs << " epochs (" << result.steps << " steps)\n";
  if (result.best_epoch >= 0) {
    std::cout << "best dev metric " << result.best_metric << " at epoch " << result.best_epoch
              << "\n";
  }
  std::cout << "final batch loss " << result.last.total << " (nll " << result.last.nll << ", disc "
            << result.last.disc << ")\n";
  std::cout << "checkpoint: " << cfg.checkpoint_path << "\n";
  return 0;
}

int run_evaluate(const std::string& ckpt_path, const std::string& input_path,
                 const std::string& metric, int k, std::optional<int> beam,
                 const std::string& out_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const RunConfig& cfg = ckpt.config;
  const std::string path = input_path.empty() ? cfg.test_path : input_path;

  std::vector<RawInstance> raws = load_jsonl(path);
  if (raws.empty()) throw DataError("empty evaluation split: " + path);
  for (RawInstance& r : raws) r = tokenize_instance(r, cfg.task);
  std::vector<Instance> encoded = encode_corpus(ckpt.vocab, raws, config_caps(cfg), cfg.features_dir);

  json report;
  report["metric"] = metric;
  report["instances"] = raws.size();
  if (metric == "loglik") {
    report["loglik"] = eval_loglik(ckpt.model, encoded);
    report["token_nll"] = mean_token_nll(ckpt.model, encoded);
    report["token_accuracy"] = token_accuracy(ckpt.model, encoded);
  } else if (metric == "cs_k") {
    report["k"] = k;
    report["cs_k"] = cs_k(ckpt.model, encoded, raws, ckpt.vocab, k);
  } else if (metric == "bleu4") {
    BeamOptions opt{beam.value_or(cfg.beam), cfg.max_len, cfg.length_normalize};
    std::vector<std::vector<std::string>> candidates;
    std::vector<std::vector<std::string>> references;
    for (std::size_t i = 0; i < raws.size(); ++i) {
      candidates.push_back(ckpt.vocab.decode(best_decode(ckpt.model, encoded[i], opt)));
      references.push_back(split_words(raws[i].target));
    }
    BleuReport b = bleu4(candidates, references);
    report["beam"] = opt.beam;
    report["bleu4"] = b.bleu;
    report["brevity_penalty"] = b.brevity_penalty;
    report["precisions"] = b.precisions;
  } else {
    throw ConfigError("unknown metric '" + metric + "'");
  }

  std::ofstream file;
  open_sink(out_path, file) << report.dump(2) << "\n";
  return 0;
}

int run_generate(const std::string& ckpt_path, const std::string& source,
                 const std::string& input_path, std::optional<int> beam, std::optional<int> max_len,
                 const std::string& out_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const RunConfig& cfg = ckpt.config;
  std::vector<RawInstance> raws = gather_inputs(source, input_path, cfg.task);
  std::vector<Instance> encoded = encode_corpus(ckpt.vocab, raws, config_caps(cfg), cfg.features_dir);

  BeamOptions opt{beam.value_or(cfg.beam), max_len.value_or(cfg.max_len), cfg.length_normalize};
  std::ofstream file;
  std::ostream& out = open_sink(out_path, file);
  for (const Instance& inst : encoded) {
    std::vector<std::string> words = ckpt.vocab.decode(best_decode(ckpt.model, inst, opt));
    out << join_words(words) << "\n";
  }
  return 0;
}

int run_complete(const std::string& ckpt_path, const std::string& source, const std::string& prefix,
                 std::optional<int> max_len, const std::string& out_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const RunConfig& cfg = ckpt.config;
  std::vector<RawInstance> raws = gather_inputs(source, "", cfg.task);
  Instance inst = encode_instance(ckpt.vocab, raws.front(), config_caps(cfg), cfg.features_dir);

  RawInstance prefix_raw;
  prefix_raw.target = prefix;
  std::vector<std::string> prefix_words = split_words(tokenize_instance(prefix_raw, cfg.task).target);
  std::vector<int> prefix_ids = ckpt.vocab.encode(prefix_words);

  const Model& model = ckpt.model;
  Tape tape(model.config.precision, false);
  ThoughtVectors tv = model.forward(tape, inst);
  LstmState state = init_state(tape, tv);
  int prev = kBos;
  for (int id : prefix_ids) {
    DecodeStep step = decode_step(tape, model.decoder, tv.thoughts, state, prev);
    state = step.state;
    prev = id;
  }

  std::vector<std::string> words = prefix_words;
  const int limit = max_len.value_or(cfg.max_len);
  for (int t = 0; t < limit; ++t) {
    DecodeStep step = decode_step(tape, model.decoder, tv.thoughts, state, prev);
    const Tensor& probs = tape.value(step.probs);
    int best = 0;
    for (int v = 1; v < model.config.vocab; ++v) {
      if (probs[v] > probs[best]) best = v;
    }
    if (best == kEos) break;
    words.push_back(ckpt.vocab.word(best));
    state = step.state;
    prev = best;
  }

  std::ofstream file;
  open_sink(out_path, file) << join_words(words) << "\n";
  return 0;
}

int run_dump_attention(const std::string& ckpt_path, const std::string& source,
                       const std::string& input_path, const std::string& out_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  const RunConfig& cfg = ckpt.config;
  if (cfg.model != ModelKind::review) {
    throw ConfigError("checkpoint model has no reviewer to trace");
  }
  std::vector<RawInstance> raws = gather_inputs(source, input_path, cfg.task);
  std::vector<Instance> encoded = encode_corpus(ckpt.vocab, raws, config_caps(cfg), cfg.features_dir);
  const Model& model = ckpt.model;
  const bool has_head = model.config.reviewer.discriminative;

  json instances = json::array();
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    Tape tape(model.config.precision, false);
    ThoughtVectors tv = model.forward(tape, encoded[i]);

    json steps = json::array();
    for (std::size_t t = 0; t < tv.trace.size(); ++t) {
      json step;
      step["step"] = t;
      step["weights"] = std::vector<double>(tape.value(tv.trace[t]).values().begin(),
                                            tape.value(tv.trace[t]).values().end());
      if (has_head) {
        Tensor scores = tape.value(linear(tape, model.reviewer.disc, tv.thoughts[t]));
        std::vector<int> order;
        for (int v = kNumSpecial; v < model.config.vocab; ++v) order.push_back(v);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
          if (scores[a] != scores[b]) return scores[a] > scores[b];
          return a < b;
        });
        json top = json::array();
        for (std::size_t r = 0; r < order.size() && r < 5; ++r) {
          top.push_back({{"word", ckpt.vocab.word(order[r])}, {"score", scores[order[r]]}});
        }
        step["top_words"] = std::move(top);
        step["scores"] = std::vector<double>(scores.values().begin(), scores.values().end());
      }
      steps.push_back(std::move(step));
    }

    json entry;
    entry["source"] = split_words(raws[i].source);
    entry["steps"] = std::move(steps);
    instances.push_back(std::move(entry));
  }

  json trace;
  trace["review_steps"] = model.config.reviewer.steps;
  trace["instances"] = std::move(instances);
  std::ofstream file;
  open_sink(out_path, file) << trace.dump(2) << "\n";
  return 0;
}

int run_synth(const std::string& task, int vocab, int min_len, int max_len, int count,
              std::uint64_t seed, const std::string& out_path) {
  TaskSpec spec;
  if (task == "copy") {
    spec.task = SyntheticTask::copy;
  } else if (task == "reverse") {
    spec.task = SyntheticTask::reverse;
  } else if (task == "word_occurrence") {
    spec.task = SyntheticTask::word_occurrence;
  } else {
    throw ConfigError("unknown synthetic task '" + task + "'");
  }
  spec.vocab = vocab;
  spec.min_len = min_len;
  spec.max_len = max_len;
  spec.count = count;
  spec.seed = seed;
  std::vector<RawInstance> instances = generate(spec);
  save_jsonl(out_path, instances);
  std::cout << "wrote " << instances.size() << " instances to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequence-to-sequence review network engine"};
  app.require_subcommand(1);

  std::string config_path;
  std::string input_path;
  std::string ckpt_path;
  std::string source;
  std::string prefix;
  std::string metric;
  std::string out_path;
  std::string task = "copy";
  std::optional<std::uint64_t> seed;
  std::optional<int> beam;
  std::optional<int> max_len;
  int k = 2;
  int synth_vocab = 10;
  int synth_min = 1;
  int synth_max = 10;
  int synth_count = 100;
  std::uint64_t synth_seed = 1;

  CLI::App* preprocess = app.add_subcommand("preprocess", "Tokenize, split, and build the vocabulary");
  preprocess->add_option("--config", config_path, "Run config JSON")->required();
  preprocess->add_option("--input", input_path, "Raw corpus JSONL")->required();

  CLI::App* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  train->add_option("--config", config_path, "Run config JSON")->required();
  train->add_option("--seed", seed, "Override the config seed");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Score a split with one metric");
  evaluate->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
  evaluate->add_option("--metric", metric, "loglik, cs_k, or bleu4")->required();
  evaluate->add_option("--input", input_path, "Split JSONL (default: config test path)");
  evaluate->add_option("--k", k, "Top-k for cs_k")->check(CLI::PositiveNumber);
  evaluate->add_option("--beam", beam, "Beam width for bleu4 decoding");
  evaluate->add_option("--out", out_path, "Report path (default: stdout)");

  CLI::App* generate_cmd = app.add_subcommand("generate", "Decode target text for sources");
  generate_cmd->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
  generate_cmd->add_option("--source", source, "Inline source text");
  generate_cmd->add_option("--input", input_path, "Source JSONL");
  generate_cmd->add_option("--beam", beam, "Beam width");
  generate_cmd->add_option("--max-len", max_len, "Decode length cap");
  generate_cmd->add_option("--out", out_path, "Output path (default: stdout)");

  CLI::App* complete = app.add_subcommand("complete", "Continue a target prefix greedily");
  complete->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
  complete->add_option("--source", source, "Inline source text")->required();
  complete->add_option("--prefix", prefix, "Target prefix to extend");
  complete->add_option("--max-len", max_len, "Continuation length cap");
  complete->add_option("--out", out_path, "Output path (default: stdout)");

  CLI::App* dump = app.add_subcommand("dump-attention", "Dump reviewer attention and word scores");
  dump->add_option("--checkpoint", ckpt_path, "Model checkpoint")->required();
  dump->add_option("--source", source, "Inline source text");
  dump->add_option("--input", input_path, "Source JSONL");
  dump->add_option("--out", out_path, "Trace path (default: stdout)");

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--task", task, "copy, reverse, or word_occurrence");
  synth->add_option("--vocab", synth_vocab, "Distinct words");
  synth->add_option("--min-len", synth_min, "Minimum source length");
  synth->add_option("--max-len", synth_max, "Maximum source length");
  synth->add_option("--count", synth_count, "Instance count");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--out", out_path, "Corpus JSONL path")->required();

  try {
    app.parse(argc, argv);
    if (preprocess->parsed()) return run_preprocess(config_path, input_path);
    if (train->parsed()) return run_train(config_path, seed);
    if (evaluate->parsed()) return run_evaluate(ckpt_path, input_path, metric, k, beam, out_path);
    if (generate_cmd->parsed()) {
      return run_generate(ckpt_path, source, input_path, beam, max_len, out_path);
    }
    if (complete->parsed()) return run_complete(ckpt_path, source, prefix, max_len, out_path);
    if (dump->parsed()) return run_dump_attention(ckpt_path, source, input_path, out_path);
    if (synth->parsed()) {
      return run_synth(task, synth_vocab, synth_min, synth_max, synth_count, synth_seed, out_path);
    }
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
