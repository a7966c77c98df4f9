#include "revnet/nn.hpp"

#include <vector>

#include "revnet/errors.hpp"

namespace revnet {

LstmParams::LstmParams(int input_dim_, int hidden_dim_)
    : input_dim(input_dim_),
      hidden_dim(hidden_dim_),
      wx({input_dim_, 4 * hidden_dim_}),
      wh({hidden_dim_, 4 * hidden_dim_}),
      b({4 * hidden_dim_}) {}

void LstmParams::init(Rng& rng, double scale) {
  wx = Tensor::uniform(wx.shape(), rng, -scale, scale);
  wh = Tensor::uniform(wh.shape(), rng, -scale, scale);
  b.fill(0.0);
}

void LstmParams::register_params(ParamRegistry& reg, const std::string& prefix) {
  reg.push_back({prefix + ".wx", &wx});
  reg.push_back({prefix + ".wh", &wh});
  reg.push_back({prefix + ".b", &b});
}

LstmState zero_state(Tape& tape, int hidden_dim) {
  return {tape.zeros(hidden_dim), tape.zeros(hidden_dim)};
}

LstmState lstm_step(Tape& tape, const LstmParams& p, Var input, const LstmState& prev) {
  if (tape.value(input).numel() != p.input_dim) {
    throw ShapeError("lstm_step: input dim " + std::to_string(tape.value(input).numel()) +
                     " != " + std::to_string(p.input_dim));
  }
  if (tape.value(prev.hidden).numel() != p.hidden_dim) {
    throw ShapeError("lstm_step: state dim " + std::to_string(tape.value(prev.hidden).numel()) +
                     " != " + std::to_string(p.hidden_dim));
  }
  const int h = p.hidden_dim;
  Var gates = tape.add(tape.add(tape.matmul(input, tape.param(p.wx)),
                                tape.matmul(prev.hidden, tape.param(p.wh))),
                       tape.param(p.b));
  Var i = tape.sigmoid(tape.slice(gates, 0, h));
  Var f = tape.sigmoid(tape.slice(gates, h, h));
  Var o = tape.sigmoid(tape.slice(gates, 2 * h, h));
  Var g = tape.tanh(tape.slice(gates, 3 * h, h));
  Var cell = tape.add(tape.mul(f, prev.cell), tape.mul(i, g));
  Var hidden = tape.mul(o, tape.tanh(cell));
  return {cell, hidden};
}

ScorerParams ScorerParams::make_dot() {
  ScorerParams p;
  p.kind = ScorerKind::dot;
  return p;
}

ScorerParams ScorerParams::make_mlp(int d1, int d2, int hidden) {
  if (hidden < 1) throw ConfigError("mlp scorer hidden size must be >= 1");
  ScorerParams p;
  p.kind = ScorerKind::mlp;
  p.mlp_hidden = hidden;
  p.w1 = Tensor({d1 + d2, hidden});
  p.b1 = Tensor({hidden});
  p.w2 = Tensor({hidden});
  p.b2 = Tensor({1});
  return p;
}

void ScorerParams::init(Rng& rng, double scale) {
  if (kind == ScorerKind::dot) return;
  w1 = Tensor::uniform(w1.shape(), rng, -scale, scale);
  b1.fill(0.0);
  w2 = Tensor::uniform(w2.shape(), rng, -scale, scale);
  b2.fill(0.0);
}

void ScorerParams::register_params(ParamRegistry& reg, const std::string& prefix) {
  if (kind == ScorerKind::dot) return;
  reg.push_back({prefix + ".w1", &w1});
  reg.push_back({prefix + ".b1", &b1});
  reg.push_back({prefix + ".w2", &w2});
  reg.push_back({prefix + ".b2", &b2});
}

Var attention_score(Tape& tape, const ScorerParams& p, Var x1, Var x2) {
  if (p.kind == ScorerKind::dot) {
    if (tape.value(x1).numel() != tape.value(x2).numel()) {
      throw ShapeError("dot scorer requires equal operand dims, got " +
                       std::to_string(tape.value(x1).numel()) + " and " +
                       std::to_string(tape.value(x2).numel()));
    }
    return tape.matmul(x1, x2);
  }
  Var both[] = {x1, x2};
  Var hidden = tape.tanh(tape.add(tape.matmul(tape.concat(both), tape.param(p.w1)), tape.param(p.b1)));
  return tape.add(tape.matmul(hidden, tape.param(p.w2)), tape.param(p.b2));
}

Attention attend(Tape& tape, const ScorerParams& p, std::span<const Var> states, Var query) {
  if (states.empty()) throw ShapeError("attend over empty state set");
  std::vector<Var> scores;
  scores.reserve(states.size());
  for (Var s : states) scores.push_back(attention_score(tape, p, s, query));
  Var weights = tape.softmax(tape.concat(scores));
  Var context = tape.matmul(weights, tape.stack_rows(states));
  return {weights, context};
}

LinearParams::LinearParams(int in_dim_, int out_dim_)
    : in_dim(in_dim_), out_dim(out_dim_), w({in_dim_, out_dim_}), b({out_dim_}) {}

void LinearParams::init(Rng& rng, double scale) {
  w = Tensor::uniform(w.shape(), rng, -scale, scale);
  b.fill(0.0);
}

void LinearParams::register_params(ParamRegistry& reg, const std::string& prefix) {
  reg.push_back({prefix + ".w", &w});
  reg.push_back({prefix + ".b", &b});
}

Var linear(Tape& tape, const LinearParams& p, Var x) {
  return tape.add(tape.matmul(x, tape.param(p.w)), tape.param(p.b));
}

EmbeddingParams::EmbeddingParams(int vocab_, int dim_)
    : vocab(vocab_), dim(dim_), table({vocab_, dim_}) {}

void EmbeddingParams::init(Rng& rng, double scale) {
  table = Tensor::uniform(table.shape(), rng, -scale, scale);
}

void EmbeddingParams::register_params(ParamRegistry& reg, const std::string& prefix) {
  reg.push_back({prefix + ".table", &table});
}

}  // namespace revnet
