#pragma once

#include <span>
#include <string>

#include "revnet/gradcheck.hpp"
#include "revnet/rng.hpp"
#include "revnet/tape.hpp"

namespace revnet {

// LSTM cell parameters. Gate blocks are packed side by side in the order
// input, forget, output, candidate, so wx is [input_dim, 4*hidden_dim].
struct LstmParams {
  int input_dim = 0;
  int hidden_dim = 0;
  Tensor wx;
  Tensor wh;
  Tensor b;

  LstmParams() = default;
  LstmParams(int input_dim, int hidden_dim);

  void init(Rng& rng, double scale = 0.08);
  void register_params(ParamRegistry& reg, const std::string& prefix);
};

struct LstmState {
  Var cell;
  Var hidden;
};

LstmState zero_state(Tape& tape, int hidden_dim);
LstmState lstm_step(Tape& tape, const LstmParams& p, Var input, const LstmState& prev);

enum class ScorerKind { dot, mlp };

// Attention scorer: either a plain dot product (equal operand dims) or a
// one-hidden-layer MLP with tanh and a scalar head.
struct ScorerParams {
  ScorerKind kind = ScorerKind::dot;
  int mlp_hidden = 0;
  Tensor w1;
  Tensor b1;
  Tensor w2;
  Tensor b2;

  static ScorerParams make_dot();
  static ScorerParams make_mlp(int d1, int d2, int hidden = 512);

  void init(Rng& rng, double scale = 0.08);
  void register_params(ParamRegistry& reg, const std::string& prefix);
};

Var attention_score(Tape& tape, const ScorerParams& p, Var x1, Var x2);

struct Attention {
  Var weights;
  Var context;
};

Attention attend(Tape& tape, const ScorerParams& p, std::span<const Var> states, Var query);

struct LinearParams {
  int in_dim = 0;
  int out_dim = 0;
  Tensor w;
  Tensor b;

  LinearParams() = default;
  LinearParams(int in_dim, int out_dim);

  void init(Rng& rng, double scale = 0.08);
  void register_params(ParamRegistry& reg, const std::string& prefix);
};

Var linear(Tape& tape, const LinearParams& p, Var x);

struct EmbeddingParams {
  int vocab = 0;
  int dim = 0;
  Tensor table;

  EmbeddingParams() = default;
  EmbeddingParams(int vocab, int dim);

  void init(Rng& rng, double scale = 0.08);
  void register_params(ParamRegistry& reg, const std::string& prefix);
};

}  // namespace revnet
