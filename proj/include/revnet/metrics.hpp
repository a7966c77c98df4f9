#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "revnet/model.hpp"

namespace revnet {

// Teacher-forced sum of log-probabilities of the target words (terminal <eos>
// excluded), averaged over instances.
double eval_loglik(const Model& model, std::span<const Instance> split);

// Total negative log-probability per target token, <eos> included.
double mean_token_nll(const Model& model, std::span<const Instance> split);

// Fraction of target positions (including <eos>) where the teacher-forced
// argmax equals the gold token.
double token_accuracy(const Model& model, std::span<const Instance> split);

// Top-k character savings. encoded[i] must be the id form of tokenized[i];
// the tokenized text supplies the gold surface forms.
double cs_k(const Model& model, std::span<const Instance> encoded,
            std::span<const RawInstance> tokenized, const Vocab& vocab, int k);

struct BleuReport {
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  double bleu = 0.0;
};

// Corpus BLEU-4: clipped modified n-gram precision, geometric mean, brevity
// penalty. Without smoothing any zero precision zeroes the score; smoothing
// adds one to numerator and denominator for n >= 2.
BleuReport bleu4(std::span<const std::vector<std::string>> candidates,
                 std::span<const std::vector<std::vector<std::string>>> reference_sets,
                 bool smooth = false);

BleuReport bleu4(std::span<const std::vector<std::string>> candidates,
                 std::span<const std::vector<std::string>> references, bool smooth = false);

}  // namespace revnet
