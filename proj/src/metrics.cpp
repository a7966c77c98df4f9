#include "revnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "revnet/errors.hpp"

namespace revnet {

namespace {

// Per-step gold log-probabilities under teacher forcing.
std::vector<double> forced_log_probs(const Model& model, const Instance& inst) {
  Tape tape(model.config.precision, false);
  ThoughtVectors tv = model.forward(tape, inst);
  LstmState state = init_state(tape, tv);
  int prev = kBos;
  std::vector<double> out;
  out.reserve(inst.target.size());
  for (int id : inst.target) {
    if (id == kPad) break;
    DecodeStep step = decode_step(tape, model.decoder, tv.thoughts, state, prev);
    out.push_back(tape.value(step.log_probs)[id]);
    state = step.state;
    prev = id;
  }
  return out;
}

}  // namespace

double eval_loglik(const Model& model, std::span<const Instance> split) {
  if (split.empty()) throw DataError("eval_loglik: empty split");
  double total = 0.0;
  for (const Instance& inst : split) {
    std::vector<double> lp = forced_log_probs(model, inst);
    double sum = 0.0;
    for (std::size_t t = 0; t < lp.size(); ++t) {
      if (inst.target[t] == kEos) continue;
      sum += lp[t];
    }
    total += sum;
  }
  return total / static_cast<double>(split.size());
}

double mean_token_nll(const Model& model, std::span<const Instance> split) {
  if (split.empty()) throw DataError("mean_token_nll: empty split");
  double total = 0.0;
  std::int64_t tokens = 0;
  for (const Instance& inst : split) {
    for (double lp : forced_log_probs(model, inst)) {
      total -= lp;
      ++tokens;
    }
  }
  if (tokens == 0) throw DataError("mean_token_nll: no target tokens");
  return total / static_cast<double>(tokens);
}

double token_accuracy(const Model& model, std::span<const Instance> split) {
  if (split.empty()) throw DataError("token_accuracy: empty split");
  std::int64_t hits = 0;
  std::int64_t tokens = 0;
  for (const Instance& inst : split) {
    Tape tape(model.config.precision, false);
    ThoughtVectors tv = model.forward(tape, inst);
    LstmState state = init_state(tape, tv);
    int prev = kBos;
    for (int id : inst.target) {
      if (id == kPad) break;
      DecodeStep step = decode_step(tape, model.decoder, tv.thoughts, state, prev);
      const Tensor& probs = tape.value(step.probs);
      int best = 0;
      for (int v = 1; v < model.decoder.vocab; ++v) {
        if (probs[v] > probs[best]) best = v;
      }
      if (best == id) ++hits;
      ++tokens;
      state = step.state;
      prev = id;
    }
  }
  if (tokens == 0) throw DataError("token_accuracy: no target tokens");
  return static_cast<double>(hits) / static_cast<double>(tokens);
}

double cs_k(const Model& model, std::span<const Instance> encoded,
            std::span<const RawInstance> tokenized, const Vocab& vocab, int k) {
  if (k < 1) throw ConfigError("cs_k: k must be >= 1");
  if (encoded.size() != tokenized.size()) {
    throw DataError("cs_k: encoded and tokenized splits differ in size");
  }
  if (encoded.empty()) throw DataError("cs_k: empty split");

  double ratio_sum = 0.0;
  std::size_t comments = 0;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const Instance& inst = encoded[i];
    std::vector<std::string> gold = split_words(tokenized[i].target);
    const std::size_t words = std::min(gold.size(), inst.target.size() - 1);
    if (words == 0) continue;

    Tape tape(model.config.precision, false);
    ThoughtVectors tv = model.forward(tape, inst);
    LstmState state = init_state(tape, tv);
    int prev = kBos;
    std::int64_t saved = 0;
    std::int64_t length = 0;
    for (std::size_t t = 0; t < words; ++t) {
      const std::string& word = gold[t];
      const int gold_id = inst.target[t];
      const std::int64_t L = static_cast<std::int64_t>(word.size());
      DecodeStep step = decode_step(tape, model.decoder, tv.thoughts, state, prev);
      const Tensor& probs = tape.value(step.probs);

      std::int64_t n = L;
      const bool reachable = gold_id >= kNumSpecial && vocab.word(gold_id) == word;
      if (reachable) {
        const double gold_prob = probs[gold_id];
        for (std::int64_t plen = 0; plen < L; ++plen) {
          int rank = 1;
          for (int v = kNumSpecial; v < vocab.size(); ++v) {
            if (v == gold_id) continue;
            const std::string& w = vocab.word(v);
            if (w.compare(0, static_cast<std::size_t>(plen), word, 0,
                          static_cast<std::size_t>(plen)) != 0) {
              continue;
            }
            if (probs[v] > gold_prob || (probs[v] == gold_prob && v < gold_id)) ++rank;
          }
          if (rank <= k) {
            n = plen;
            break;
          }
        }
      }
      saved += L - n;
      length += L;
      state = step.state;
      prev = gold_id;
    }
    if (length > 0) {
      ratio_sum += static_cast<double>(saved) / static_cast<double>(length);
      ++comments;
    }
  }
  if (comments == 0) throw DataError("cs_k: no scorable comments");
  return ratio_sum / static_cast<double>(comments);
}

namespace {

std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& words, int n) {
  std::map<std::vector<std::string>, int> counts;
  if (static_cast<int>(words.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= words.size(); ++i) {
    std::vector<std::string> gram(words.begin() + static_cast<std::ptrdiff_t>(i),
                                  words.begin() + static_cast<std::ptrdiff_t>(i) + n);
    ++counts[gram];
  }
  return counts;
}

}  // namespace

BleuReport bleu4(std::span<const std::vector<std::string>> candidates,
                 std::span<const std::vector<std::vector<std::string>>> reference_sets,
                 bool smooth) {
  if (candidates.empty()) throw DataError("bleu4: empty candidate list");
  if (candidates.size() != reference_sets.size()) {
    throw DataError("bleu4: candidate and reference counts differ");
  }
  for (const auto& refs : reference_sets) {
    if (refs.empty()) throw DataError("bleu4: empty reference set");
  }

  std::int64_t cand_len = 0;
  std::int64_t ref_len = 0;
  std::array<std::int64_t, 4> matches{};
  std::array<std::int64_t, 4> totals{};

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& cand = candidates[i];
    const auto& refs = reference_sets[i];
    cand_len += static_cast<std::int64_t>(cand.size());

    std::int64_t closest = static_cast<std::int64_t>(refs[0].size());
    for (const auto& ref : refs) {
      const auto len = static_cast<std::int64_t>(ref.size());
      const auto c = static_cast<std::int64_t>(cand.size());
      if (std::llabs(len - c) < std::llabs(closest - c) ||
          (std::llabs(len - c) == std::llabs(closest - c) && len < closest)) {
        closest = len;
      }
    }
    ref_len += closest;

    for (int n = 1; n <= 4; ++n) {
      auto cand_grams = ngram_counts(cand, n);
      std::map<std::vector<std::string>, int> max_ref;
      for (const auto& ref : refs) {
        for (const auto& [gram, count] : ngram_counts(ref, n)) {
          max_ref[gram] = std::max(max_ref[gram], count);
        }
      }
      for (const auto& [gram, count] : cand_grams) {
        auto it = max_ref.find(gram);
        matches[static_cast<std::size_t>(n - 1)] += std::min(count, it == max_ref.end() ? 0 : it->second);
        totals[static_cast<std::size_t>(n - 1)] += count;
      }
    }
  }

  BleuReport report;
  double log_sum = 0.0;
  bool zero = false;
  for (int n = 0; n < 4; ++n) {
    double m = static_cast<double>(matches[static_cast<std::size_t>(n)]);
    double t = static_cast<double>(totals[static_cast<std::size_t>(n)]);
    double p;
    if (t == 0.0) {
      p = 1.0;  // no candidate n-grams at this order anywhere in the corpus
    } else if (smooth && n >= 1) {
      p = (m + 1.0) / (t + 1.0);
    } else {
      p = m / t;
    }
    report.precisions[static_cast<std::size_t>(n)] = p;
    if (p == 0.0) {
      zero = true;
    } else {
      log_sum += std::log(p);
    }
  }
  report.brevity_penalty =
      cand_len == 0 ? 0.0
                    : (cand_len >= ref_len
                           ? 1.0
                           : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len)));
  report.bleu = zero ? 0.0 : report.brevity_penalty * std::exp(log_sum / 4.0);
  return report;
}

BleuReport bleu4(std::span<const std::vector<std::string>> candidates,
                 std::span<const std::vector<std::string>> references, bool smooth) {
  std::vector<std::vector<std::vector<std::string>>> sets;
  sets.reserve(references.size());
  for (const auto& ref : references) sets.push_back({ref});
  return bleu4(candidates, sets, smooth);
}

}  // namespace revnet
