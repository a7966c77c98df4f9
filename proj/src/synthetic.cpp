#include "revnet/synthetic.hpp"

#include <algorithm>

#include "revnet/errors.hpp"
#include "revnet/rng.hpp"

namespace revnet {

std::string synthetic_word(int id) {
  std::string tail;
  int v = id;
  do {
    tail.push_back(static_cast<char>('a' + v % 26));
    v /= 26;
  } while (v > 0);
  std::reverse(tail.begin(), tail.end());
  return "w" + tail;
}

std::vector<RawInstance> generate(const TaskSpec& spec) {
  if (spec.vocab < 2) throw ConfigError("synthetic: vocab size must be at least 2");
  if (spec.min_len < 1) throw ConfigError("synthetic: minimum length must be at least 1");
  if (spec.max_len < spec.min_len) throw ConfigError("synthetic: length range is empty");
  if (spec.count < 1) throw ConfigError("synthetic: instance count must be positive");

  std::vector<RawInstance> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int i = 0; i < spec.count; ++i) {
    Rng rng(spec.seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(i + 1));
    const int len =
        spec.min_len + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_len - spec.min_len + 1)));
    std::vector<int> ids;
    ids.reserve(static_cast<std::size_t>(len));
    for (int t = 0; t < len; ++t) {
      ids.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.vocab))));
    }

    std::vector<int> target_ids;
    switch (spec.task) {
      case SyntheticTask::copy:
        target_ids = ids;
        break;
      case SyntheticTask::reverse:
        target_ids.assign(ids.rbegin(), ids.rend());
        break;
      case SyntheticTask::word_occurrence:
        target_ids = ids;
        std::sort(target_ids.begin(), target_ids.end());
        target_ids.erase(std::unique(target_ids.begin(), target_ids.end()), target_ids.end());
        break;
    }

    RawInstance inst;
    std::vector<std::string> src_words;
    for (int id : ids) src_words.push_back(synthetic_word(id));
    std::vector<std::string> tgt_words;
    for (int id : target_ids) tgt_words.push_back(synthetic_word(id));
    inst.source = join_words(src_words);
    inst.target = join_words(tgt_words);
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace revnet
