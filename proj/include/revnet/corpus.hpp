#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "revnet/encoder.hpp"
#include "revnet/rng.hpp"
#include "revnet/tokens.hpp"

namespace revnet {

enum class TaskKind { caption, code };

// Lowercases, replaces non-alphabetic characters with spaces, splits on
// whitespace.
std::vector<std::string> normalize_caption(const std::string& text);

// Splits camelCase at lower-to-upper boundaries, then normalizes as above.
std::vector<std::string> tokenize_code(const std::string& text);

class Vocab {
 public:
  Vocab();

  // Built from training documents only: words with frequency >= threshold
  // keep an id (frequency descending, then lexicographic); the rest fall
  // back to <unk>.
  static Vocab build(std::span<const std::vector<std::string>> docs, int threshold);

  // Rebuilds a vocabulary from parallel word/count arrays, e.g. out of a
  // checkpoint manifest. The special tokens must lead in their fixed order.
  static Vocab from_entries(std::span<const std::string> words,
                            std::span<const std::int64_t> counts);

  int size() const { return static_cast<int>(words_.size()); }
  int id(const std::string& word) const;
  const std::string& word(int id) const;
  std::int64_t count(int id) const;
  std::vector<int> encode(std::span<const std::string> words) const;
  std::vector<std::string> decode(std::span<const int> ids) const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  bool operator==(const Vocab& other) const;

 private:
  std::vector<std::string> words_;
  std::vector<std::int64_t> counts_;
  std::unordered_map<std::string, int> index_;
};

// One corpus line before id encoding. Exactly one of source/features is set;
// group carries the file key used for split sampling when present.
struct RawInstance {
  std::string source;
  std::string features;
  std::string target;
  std::string group;
};

std::vector<RawInstance> load_jsonl(const std::string& path);
void save_jsonl(const std::string& path, std::span<const RawInstance> instances);

RawInstance tokenize_instance(const RawInstance& raw, TaskKind task);

struct SplitSpec {
  double test_frac = 0.1;
  double dev_frac = 0.1;
  std::uint64_t seed = 1;
};

struct RawSplits {
  std::vector<RawInstance> train;
  std::vector<RawInstance> dev;
  std::vector<RawInstance> test;
};

// Samples whole groups (files) into test/dev; instances without a group are
// sampled individually.
RawSplits split_corpus(std::span<const RawInstance> all, const SplitSpec& spec);

std::vector<std::vector<std::string>> collect_token_docs(std::span<const RawInstance> instances);

struct Caps {
  int source = 300;
  int target = 300;
};

struct Instance {
  std::vector<int> source;
  std::vector<int> target;
  std::shared_ptr<FeatureGrid> grid;
};

// Truncates to the caps, then appends <eos> to the target. Feature paths are
// resolved against base_dir and loaded eagerly.
Instance encode_instance(const Vocab& vocab, const RawInstance& raw, const Caps& caps,
                         const std::string& base_dir = "");

std::vector<Instance> encode_corpus(const Vocab& vocab, std::span<const RawInstance> instances,
                                    const Caps& caps, const std::string& base_dir = "");

std::vector<std::string> split_words(const std::string& text);
std::string join_words(std::span<const std::string> words);

}  // namespace revnet
