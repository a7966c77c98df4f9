#include "revnet/reviewer.hpp"

#include "revnet/errors.hpp"

namespace revnet {

ReviewerParams::ReviewerParams(const ReviewerConfig& config_, int hidden_dim_, ScorerKind scorer_kind,
                               int mlp_hidden, int disc_vocab)
    : config(config_), hidden_dim(hidden_dim_) {
  if (config.steps < 1) throw ConfigError("reviewer steps must be >= 1");
  if (config.variant != ReviewerVariant::identity_reduction) {
    const int count = config.tying == WeightTying::tied ? 1 : config.steps;
    for (int i = 0; i < count; ++i) units.emplace_back(hidden_dim, hidden_dim);
    scorer = scorer_kind == ScorerKind::dot ? ScorerParams::make_dot()
                                            : ScorerParams::make_mlp(hidden_dim, hidden_dim, mlp_hidden);
  }
  if (config.variant == ReviewerVariant::attentive_output) wout = Tensor({hidden_dim, hidden_dim});
  wprime = Tensor({2 * hidden_dim, hidden_dim});
  if (config.discriminative) {
    if (disc_vocab < 1) throw ConfigError("discriminative head requires a vocabulary size");
    disc = LinearParams(hidden_dim, disc_vocab);
  }
}

const LstmParams& ReviewerParams::unit(int step) const {
  return config.tying == WeightTying::tied ? units[0] : units[static_cast<std::size_t>(step)];
}

void ReviewerParams::set_select_context() {
  wprime.fill(0.0);
  for (int j = 0; j < hidden_dim; ++j) wprime.at(hidden_dim + j, j) = 1.0;
}

void ReviewerParams::init(Rng& rng, double scale) {
  for (LstmParams& u : units) u.init(rng, scale);
  if (config.variant == ReviewerVariant::attentive_output) {
    wout = Tensor::uniform(wout.shape(), rng, -scale, scale);
  }
  wprime = Tensor::uniform(wprime.shape(), rng, -scale, scale);
  scorer.init(rng, scale);
  if (config.discriminative) disc.init(rng, scale);
}

void ReviewerParams::register_params(ParamRegistry& reg, const std::string& prefix) {
  for (std::size_t i = 0; i < units.size(); ++i) {
    units[i].register_params(reg, prefix + ".unit" + std::to_string(i));
  }
  if (config.variant == ReviewerVariant::attentive_output) reg.push_back({prefix + ".wout", &wout});
  reg.push_back({prefix + ".wprime", &wprime});
  scorer.register_params(reg, prefix + ".scorer");
  if (config.discriminative) disc.register_params(reg, prefix + ".disc");
}

ReviewStep review_input_step(Tape& tape, const LstmParams& unit, const ScorerParams& scorer,
                             std::span<const Var> states, const LstmState& prev) {
  Attention att = attend(tape, scorer, states, prev.hidden);
  LstmState next = lstm_step(tape, unit, att.context, prev);
  return {next, next.hidden, att.weights};
}

ReviewStep review_output_step(Tape& tape, const LstmParams& unit, const Tensor& wout,
                              const ScorerParams& scorer, std::span<const Var> states,
                              const LstmState& prev, Var query) {
  Attention att = attend(tape, scorer, states, query);
  LstmState next = lstm_step(tape, unit, tape.zeros(unit.input_dim), prev);
  Var thought = tape.add(next.hidden, tape.matmul(att.context, tape.param(wout)));
  return {next, thought, att.weights};
}

ThoughtVectors run_reviewer(Tape& tape, const ReviewerParams& p, const EncoderOutput& enc) {
  ThoughtVectors out;
  const int steps = p.config.steps;
  out.thoughts.reserve(static_cast<std::size_t>(steps));
  out.trace.reserve(static_cast<std::size_t>(steps));

  if (p.config.variant == ReviewerVariant::identity_reduction) {
    if (steps != enc.length()) {
      throw ShapeError("identity reduction requires steps == |H|, got " + std::to_string(steps) +
                       " and " + std::to_string(enc.length()));
    }
    for (int t = 0; t < steps; ++t) {
      out.thoughts.push_back(enc.states[t]);
      Tensor onehot({enc.length()});
      onehot[t] = 1.0;
      out.trace.push_back(tape.constant(std::move(onehot)));
    }
  } else {
    LstmState state{enc.context, enc.context};
    Var query = enc.context;
    for (int t = 0; t < steps; ++t) {
      ReviewStep step = p.config.variant == ReviewerVariant::attentive_input
                            ? review_input_step(tape, p.unit(t), p.scorer, enc.states, state)
                            : review_output_step(tape, p.unit(t), p.wout, p.scorer, enc.states,
                                                 state, query);
      state = step.state;
      query = step.thought;
      out.thoughts.push_back(step.thought);
      out.trace.push_back(step.weights);
    }
  }

  Var tail[] = {out.thoughts.back(), enc.context};
  out.review = tape.matmul(tape.concat(tail), tape.param(p.wprime));
  return out;
}

Var discriminative_scores(Tape& tape, const LinearParams& head, std::span<const Var> thoughts) {
  if (thoughts.empty()) throw ShapeError("discriminative_scores over empty thought list");
  std::vector<Var> rows;
  rows.reserve(thoughts.size());
  for (Var f : thoughts) rows.push_back(linear(tape, head, f));
  return tape.max_rows(tape.stack_rows(rows));
}

}  // namespace revnet
