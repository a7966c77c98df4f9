#include "revnet/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "revnet/errors.hpp"

namespace revnet {

namespace {

bool ascii_alpha(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool ascii_lower(unsigned char c) { return c >= 'a' && c <= 'z'; }
bool ascii_upper(unsigned char c) { return c >= 'A' && c <= 'Z'; }

std::vector<std::string> normalize_chars(const std::string& text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (unsigned char c : text) {
    if (ascii_alpha(c)) {
      cleaned.push_back(static_cast<char>(std::tolower(c)));
    } else {
      cleaned.push_back(' ');
    }
  }
  return split_words(cleaned);
}

}  // namespace

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

std::vector<std::string> normalize_caption(const std::string& text) { return normalize_chars(text); }

std::vector<std::string> tokenize_code(const std::string& text) {
  std::string spaced;
  spaced.reserve(text.size() + text.size() / 4);
  for (std::size_t i = 0; i < text.size(); ++i) {
    spaced.push_back(text[i]);
    if (i + 1 < text.size() && ascii_lower(static_cast<unsigned char>(text[i])) &&
        ascii_upper(static_cast<unsigned char>(text[i + 1]))) {
      spaced.push_back(' ');
    }
  }
  return normalize_chars(spaced);
}

Vocab::Vocab() {
  for (int i = 0; i < kNumSpecial; ++i) {
    words_.emplace_back(special_token_name(i));
    counts_.push_back(0);
    index_.emplace(words_.back(), i);
  }
}

Vocab Vocab::build(std::span<const std::vector<std::string>> docs, int threshold) {
  if (threshold < 1) throw ConfigError("vocabulary threshold must be >= 1");
  std::map<std::string, std::int64_t> freq;
  for (const auto& doc : docs) {
    for (const std::string& w : doc) ++freq[w];
  }
  if (freq.empty()) throw DataError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (const auto& [word, count] : freq) {
    if (count >= threshold) kept.emplace_back(word, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocab v;
  for (auto& [word, count] : kept) {
    if (v.index_.count(word)) continue;  // a special token name appearing as data
    v.index_.emplace(word, static_cast<int>(v.words_.size()));
    v.words_.push_back(word);
    v.counts_.push_back(count);
  }
  return v;
}

int Vocab::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::word(int token_id) const {
  if (token_id < 0 || token_id >= size()) {
    throw DataError("token id " + std::to_string(token_id) + " outside vocabulary of size " +
                    std::to_string(size()));
  }
  return words_[static_cast<std::size_t>(token_id)];
}

std::int64_t Vocab::count(int token_id) const {
  if (token_id < 0 || token_id >= size()) {
    throw DataError("token id " + std::to_string(token_id) + " outside vocabulary of size " +
                    std::to_string(size()));
  }
  return counts_[static_cast<std::size_t>(token_id)];
}

std::vector<int> Vocab::encode(std::span<const std::string> words) const {
  std::vector<int> ids;
  ids.reserve(words.size());
  for (const std::string& w : words) ids.push_back(id(w));
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const int> ids) const {
  std::vector<std::string> words;
  words.reserve(ids.size());
  for (int token_id : ids) words.push_back(word(token_id));
  return words;
}

Vocab Vocab::from_entries(std::span<const std::string> words, std::span<const std::int64_t> counts) {
  if (words.size() != counts.size()) {
    throw DataError("vocabulary entries: word and count arrays differ in length");
  }
  if (words.size() <= static_cast<std::size_t>(kNumSpecial)) {
    throw DataError("vocabulary entries: no regular words");
  }
  Vocab v;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i < static_cast<std::size_t>(kNumSpecial)) {
      if (words[i] != special_token_name(static_cast<int>(i))) {
        throw DataError("vocabulary entries: special token mismatch at id " + std::to_string(i));
      }
      continue;
    }
    auto [it, inserted] = v.index_.emplace(words[i], static_cast<int>(v.words_.size()));
    if (!inserted) throw DataError("vocabulary entries: duplicate word '" + words[i] + "'");
    v.words_.push_back(words[i]);
    v.counts_.push_back(counts[i]);
  }
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  for (int i = 0; i < size(); ++i) {
    out << words_[static_cast<std::size_t>(i)] << '\t' << i << '\t'
        << counts_[static_cast<std::size_t>(i)] << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file: " + path);
  Vocab v;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream row(line);
    std::string word;
    int token_id = 0;
    std::int64_t count = 0;
    if (!(std::getline(row, word, '\t') && row >> token_id && row.get() == '\t' && row >> count)) {
      throw DataError(path + ": malformed vocabulary line " + std::to_string(line_no));
    }
    if (token_id != line_no - 1) {
      throw DataError(path + ": id " + std::to_string(token_id) + " out of order at line " +
                      std::to_string(line_no));
    }
    if (token_id < kNumSpecial) {
      if (word != special_token_name(token_id)) {
        throw DataError(path + ": special token mismatch at id " + std::to_string(token_id));
      }
      continue;
    }
    v.index_.emplace(word, static_cast<int>(v.words_.size()));
    v.words_.push_back(word);
    v.counts_.push_back(count);
  }
  if (v.size() <= kNumSpecial) throw DataError(path + ": vocabulary has no regular words");
  return v;
}

bool Vocab::operator==(const Vocab& other) const {
  return words_ == other.words_ && counts_ == other.counts_;
}

std::vector<RawInstance> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  std::vector<RawInstance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!obj.is_object()) throw DataError(path + ":" + std::to_string(line_no) + ": expected an object");
    RawInstance inst;
    for (const auto& [key, value] : obj.items()) {
      if (key == "source") {
        inst.source = value.get<std::string>();
      } else if (key == "features") {
        inst.features = value.get<std::string>();
      } else if (key == "target") {
        inst.target = value.get<std::string>();
      } else if (key == "file") {
        inst.group = value.get<std::string>();
      } else {
        throw DataError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
    }
    if (!obj.contains("target")) {
      throw DataError(path + ":" + std::to_string(line_no) + ": missing 'target'");
    }
    if (obj.contains("source") == obj.contains("features")) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": need exactly one of 'source' or 'features'");
    }
    out.push_back(std::move(inst));
  }
  return out;
}

void save_jsonl(const std::string& path, std::span<const RawInstance> instances) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file: " + path);
  for (const RawInstance& inst : instances) {
    nlohmann::json obj;
    if (!inst.features.empty()) {
      obj["features"] = inst.features;
    } else {
      obj["source"] = inst.source;
    }
    obj["target"] = inst.target;
    if (!inst.group.empty()) obj["file"] = inst.group;
    out << obj.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

RawInstance tokenize_instance(const RawInstance& raw, TaskKind task) {
  RawInstance out = raw;
  if (task == TaskKind::code) {
    out.source = join_words(tokenize_code(raw.source));
    out.target = join_words(tokenize_code(raw.target));
  } else {
    out.target = join_words(normalize_caption(raw.target));
  }
  return out;
}

RawSplits split_corpus(std::span<const RawInstance> all, const SplitSpec& spec) {
  if (spec.test_frac < 0 || spec.dev_frac < 0 || spec.test_frac + spec.dev_frac >= 1.0) {
    throw ConfigError("split fractions must be nonnegative and sum below 1");
  }
  std::vector<std::string> groups;
  std::unordered_map<std::string, std::size_t> group_index;
  std::vector<std::size_t> instance_group(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::string key = all[i].group.empty() ? "#" + std::to_string(i) : all[i].group;
    auto [it, inserted] = group_index.emplace(key, groups.size());
    if (inserted) groups.push_back(key);
    instance_group[i] = it->second;
  }

  std::vector<std::size_t> order(groups.size());
  for (std::size_t g = 0; g < order.size(); ++g) order[g] = g;
  Rng rng(spec.seed);
  rng.shuffle(order);

  const auto n = static_cast<double>(groups.size());
  const std::size_t n_test = static_cast<std::size_t>(std::lround(spec.test_frac * n));
  const std::size_t n_dev = static_cast<std::size_t>(std::lround(spec.dev_frac * n));

  enum class Dest { train, dev, test };
  std::vector<Dest> dest(groups.size(), Dest::train);
  for (std::size_t i = 0; i < n_test && i < order.size(); ++i) dest[order[i]] = Dest::test;
  for (std::size_t i = n_test; i < n_test + n_dev && i < order.size(); ++i) dest[order[i]] = Dest::dev;

  RawSplits splits;
  for (std::size_t i = 0; i < all.size(); ++i) {
    switch (dest[instance_group[i]]) {
      case Dest::train: splits.train.push_back(all[i]); break;
      case Dest::dev: splits.dev.push_back(all[i]); break;
      case Dest::test: splits.test.push_back(all[i]); break;
    }
  }
  return splits;
}

std::vector<std::vector<std::string>> collect_token_docs(std::span<const RawInstance> instances) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(instances.size() * 2);
  for (const RawInstance& inst : instances) {
    if (!inst.source.empty()) docs.push_back(split_words(inst.source));
    docs.push_back(split_words(inst.target));
  }
  return docs;
}

Instance encode_instance(const Vocab& vocab, const RawInstance& raw, const Caps& caps,
                         const std::string& base_dir) {
  if (caps.source < 1 || caps.target < 1) throw ConfigError("truncation caps must be >= 1");
  Instance inst;
  if (!raw.features.empty()) {
    std::string path = raw.features;
    if (!base_dir.empty() && !path.empty() && path[0] != '/') path = base_dir + "/" + path;
    inst.grid = std::make_shared<FeatureGrid>(FeatureGrid::load(path));
  } else {
    const std::vector<std::string> words = split_words(raw.source);
    inst.source = vocab.encode(words);
    if (static_cast<int>(inst.source.size()) > caps.source) inst.source.resize(caps.source);
  }
  const std::vector<std::string> words = split_words(raw.target);
  inst.target = vocab.encode(words);
  if (static_cast<int>(inst.target.size()) > caps.target) inst.target.resize(caps.target);
  inst.target.push_back(kEos);
  return inst;
}

std::vector<Instance> encode_corpus(const Vocab& vocab, std::span<const RawInstance> instances,
                                    const Caps& caps, const std::string& base_dir) {
  std::vector<Instance> out;
  out.reserve(instances.size());
  for (const RawInstance& raw : instances) out.push_back(encode_instance(vocab, raw, caps, base_dir));
  return out;
}

}  // namespace revnet
