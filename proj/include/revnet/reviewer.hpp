#pragma once

#include <span>
#include <string>
#include <vector>

#include "revnet/encoder.hpp"
#include "revnet/nn.hpp"

namespace revnet {

enum class ReviewerVariant { attentive_input, attentive_output, identity_reduction };
enum class WeightTying { tied, untied };

struct ReviewerConfig {
  ReviewerVariant variant = ReviewerVariant::attentive_input;
  int steps = 8;
  WeightTying tying = WeightTying::tied;
  bool discriminative = false;
};

// Review pass output: thought vectors F, the review vector r, and the
// attention weights over H recorded at each step.
struct ThoughtVectors {
  std::vector<Var> thoughts;
  Var review;
  std::vector<Var> trace;
};

struct ReviewStep {
  LstmState state;
  Var thought;
  Var weights;
};

struct ReviewerParams {
  ReviewerConfig config;
  int hidden_dim = 0;
  std::vector<LstmParams> units;
  Tensor wout;
  Tensor wprime;
  ScorerParams scorer;
  LinearParams disc;

  ReviewerParams() = default;
  ReviewerParams(const ReviewerConfig& config, int hidden_dim, ScorerKind scorer_kind,
                 int mlp_hidden = 512, int disc_vocab = 0);

  const LstmParams& unit(int step) const;
  // Sets W' to select the context half of [f; c], making r == c exactly.
  void set_select_context();

  void init(Rng& rng, double scale = 0.08);
  void register_params(ParamRegistry& reg, const std::string& prefix);
};

ReviewStep review_input_step(Tape& tape, const LstmParams& unit, const ScorerParams& scorer,
                             std::span<const Var> states, const LstmState& prev);

ReviewStep review_output_step(Tape& tape, const LstmParams& unit, const Tensor& wout,
                              const ScorerParams& scorer, std::span<const Var> states,
                              const LstmState& prev, Var query);

ThoughtVectors run_reviewer(Tape& tape, const ReviewerParams& p, const EncoderOutput& enc);

Var discriminative_scores(Tape& tape, const LinearParams& head, std::span<const Var> thoughts);

}  // namespace revnet
