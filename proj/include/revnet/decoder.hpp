#pragma once

#include <span>
#include <string>
#include <vector>

#include "revnet/nn.hpp"
#include "revnet/reviewer.hpp"
#include "revnet/tokens.hpp"

namespace revnet {

// Output-side LSTM. Each step attends over the thought vectors with the
// previous hidden state as query and consumes [attended context; previous
// token embedding]. With use_attention off the context slot is held at zero.
struct DecoderParams {
  int hidden_dim = 0;
  int embed_dim = 0;
  int vocab = 0;
  bool use_attention = true;
  LstmParams lstm;
  ScorerParams scorer;
  LinearParams out;
  EmbeddingParams emb;

  DecoderParams() = default;
  DecoderParams(int hidden_dim, int embed_dim, int vocab, ScorerKind scorer_kind,
                int mlp_hidden = 512, bool use_attention = true);

  void init(Rng& rng, double scale = 0.08);
  void register_params(ParamRegistry& reg, const std::string& prefix);
};

struct DecodeStep {
  LstmState state;
  Var log_probs;
  Var probs;
  Var weights;
};

LstmState init_state(Tape& tape, const ThoughtVectors& thoughts);

DecodeStep decode_step(Tape& tape, const DecoderParams& p, std::span<const Var> thoughts,
                       const LstmState& prev, int prev_token);

// Argmax decoding from <bos>; ties pick the lowest token id. The returned
// sequence carries neither <bos> nor <eos>.
std::vector<int> greedy_decode(Tape& tape, const DecoderParams& p, const ThoughtVectors& thoughts,
                               int max_len);

struct Hypothesis {
  std::vector<int> tokens;
  double log_prob = 0.0;
  bool completed = false;

  // Generated tokens without the terminating <eos>.
  std::vector<int> surface() const;
};

struct BeamOptions {
  int beam = 3;
  int max_len = 30;
  bool length_normalize = false;
};

std::vector<Hypothesis> beam_search(Tape& tape, const DecoderParams& p,
                                    const ThoughtVectors& thoughts, const BeamOptions& opt);

// Teacher-forced total log-probability of a token sequence (ending in <eos>
// when it has one; the sequence is consumed exactly as given).
double sequence_log_prob(Tape& tape, const DecoderParams& p, const ThoughtVectors& thoughts,
                         std::span<const int> tokens);

}  // namespace revnet
