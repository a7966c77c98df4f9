#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "revnet/corpus.hpp"

namespace revnet {

enum class SyntheticTask { copy, reverse, word_occurrence };

// Generation is a pure function of the TaskSpec: each instance draws from its
// own seeded stream, so corpora are reproducible and instances independent.
struct TaskSpec {
  SyntheticTask task = SyntheticTask::copy;
  int vocab = 10;
  int min_len = 1;
  int max_len = 10;
  int count = 100;
  std::uint64_t seed = 1;
};

// "w" plus the id in base-26 letters ("wa", "wb", ..., "wba"). Purely
// alphabetic so the words survive the caption and code tokenizers unchanged.
std::string synthetic_word(int id);

// copy: target == source; reverse: target == reversed source;
// word_occurrence: target = unique source tokens in id order.
std::vector<RawInstance> generate(const TaskSpec& spec);

}  // namespace revnet
