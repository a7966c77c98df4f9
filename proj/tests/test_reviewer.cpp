#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <vector>

#include "doctest.h"
#include "revnet/gradcheck.hpp"
#include "revnet/reviewer.hpp"
#include "revnet/rng.hpp"

using namespace revnet;

namespace {

EncoderOutput random_encoding(Tape& tape, Rng& rng, int len, int dim) {
  EncoderOutput enc;
  for (int i = 0; i < len; ++i) enc.states.push_back(tape.constant(Tensor::uniform({dim}, rng, -1.0, 1.0)));
  enc.context = enc.states.back();
  return enc;
}

ReviewerConfig make_config(ReviewerVariant variant, int steps, WeightTying tying = WeightTying::tied) {
  ReviewerConfig cfg;
  cfg.variant = variant;
  cfg.steps = steps;
  cfg.tying = tying;
  return cfg;
}

}  // namespace

TEST_CASE("input step with one state feeds that state") {
  Rng rng(3);
  LstmParams unit(2, 2);
  unit.init(rng);
  ScorerParams scorer = ScorerParams::make_mlp(2, 2, 4);
  scorer.init(rng);
  Tape tape;
  Var h1 = tape.constant(Tensor({2}, {0.4, -0.9}));
  std::vector<Var> states{h1};
  LstmState prev{tape.constant(Tensor::uniform({2}, rng, -1.0, 1.0)),
                 tape.constant(Tensor::uniform({2}, rng, -1.0, 1.0))};
  ReviewStep step = review_input_step(tape, unit, scorer, states, prev);
  CHECK(tape.value(step.weights) == Tensor({1}, {1.0}));
  LstmState expect = lstm_step(tape, unit, h1, prev);
  CHECK(tape.value(step.state.hidden) == tape.value(expect.hidden));
  CHECK(tape.value(step.state.cell) == tape.value(expect.cell));
}

TEST_CASE("input step with equal scores feeds the mean") {
  Rng rng(5);
  LstmParams unit(3, 3);
  unit.init(rng);
  ScorerParams scorer = ScorerParams::make_dot();
  Tape tape;
  std::vector<Var> states;
  Tensor mean({3});
  for (int i = 0; i < 4; ++i) {
    Tensor s = Tensor::uniform({3}, rng, -1.0, 1.0);
    for (int j = 0; j < 3; ++j) mean[j] += s[j] / 4.0;
    states.push_back(tape.constant(s));
  }
  ReviewStep step = review_input_step(tape, unit, scorer, states, zero_state(tape, 3));
  LstmState expect = lstm_step(tape, unit, tape.constant(mean), zero_state(tape, 3));
  for (int j = 0; j < 3; ++j) {
    CHECK(tape.value(step.state.hidden)[j] == doctest::Approx(tape.value(expect.hidden)[j]).epsilon(1e-12));
  }
}

TEST_CASE("input step equals attend plus lstm composed by hand") {
  Rng rng(7);
  LstmParams unit(3, 3);
  unit.init(rng);
  ScorerParams scorer = ScorerParams::make_mlp(3, 3, 4);
  scorer.init(rng);
  Tape tape;
  std::vector<Var> states{tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0)),
                          tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0))};
  LstmState prev{tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0)),
                 tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0))};
  ReviewStep step = review_input_step(tape, unit, scorer, states, prev);
  Attention att = attend(tape, scorer, states, prev.hidden);
  LstmState expect = lstm_step(tape, unit, att.context, prev);
  CHECK(tape.value(step.state.hidden) == tape.value(expect.hidden));
  CHECK(tape.value(step.weights) == tape.value(att.weights));
}

TEST_CASE("output step with zero mix matrix is plain lstm output") {
  Rng rng(9);
  LstmParams unit(3, 3);
  unit.init(rng);
  Tensor wout({3, 3});
  ScorerParams scorer = ScorerParams::make_dot();
  Tape tape;
  std::vector<Var> states{tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0)),
                          tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0))};
  LstmState prev{tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0)),
                 tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0))};
  ReviewStep step = review_output_step(tape, unit, wout, scorer, states, prev, prev.hidden);
  LstmState expect = lstm_step(tape, unit, tape.zeros(3), prev);
  CHECK(tape.value(step.thought) == tape.value(expect.hidden));
}

TEST_CASE("output step with zero lstm and identity mix emits the mean") {
  Rng rng(11);
  LstmParams unit(2, 2);
  Tensor wout = Tensor::identity(2);
  ScorerParams scorer = ScorerParams::make_dot();
  Tape tape;
  std::vector<Var> states{tape.constant(Tensor({2}, {1.0, 3.0})), tape.constant(Tensor({2}, {3.0, 5.0}))};
  ReviewStep step = review_output_step(tape, unit, wout, scorer, states, zero_state(tape, 2),
                                       tape.zeros(2));
  CHECK(tape.value(step.thought)[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(tape.value(step.thought)[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("output step equals hand composition") {
  Rng rng(13);
  LstmParams unit(3, 3);
  unit.init(rng);
  Tensor wout = Tensor::uniform({3, 3}, rng, -0.5, 0.5);
  ScorerParams scorer = ScorerParams::make_mlp(3, 3, 4);
  scorer.init(rng);
  Tape tape;
  std::vector<Var> states{tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0)),
                          tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0))};
  LstmState prev{tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0)),
                 tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0))};
  Var query = tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0));
  ReviewStep step = review_output_step(tape, unit, wout, scorer, states, prev, query);
  Attention att = attend(tape, scorer, states, query);
  LstmState ls = lstm_step(tape, unit, tape.zeros(3), prev);
  Var expect = tape.add(ls.hidden, tape.matmul(att.context, tape.param(wout)));
  CHECK(tape.value(step.thought) == tape.value(expect));
  CHECK(tape.value(step.state.hidden) == tape.value(ls.hidden));
}

TEST_CASE("identity reduction copies the encoder states") {
  Rng rng(17);
  ReviewerParams p(make_config(ReviewerVariant::identity_reduction, 3), 4, ScorerKind::dot);
  p.init(rng);
  p.set_select_context();
  Tape tape;
  EncoderOutput enc = random_encoding(tape, rng, 3, 4);
  ThoughtVectors tv = run_reviewer(tape, p, enc);
  REQUIRE(tv.thoughts.size() == 3);
  for (int t = 0; t < 3; ++t) CHECK(tape.value(tv.thoughts[t]) == tape.value(enc.states[t]));
  CHECK(tape.value(tv.review) == tape.value(enc.context));
  CHECK(tape.value(tv.trace[1]) == Tensor({3}, {0.0, 1.0, 0.0}));
}

TEST_CASE("identity reduction requires matching lengths") {
  Rng rng(19);
  ReviewerParams p(make_config(ReviewerVariant::identity_reduction, 4), 4, ScorerKind::dot);
  Tape tape;
  EncoderOutput enc = random_encoding(tape, rng, 3, 4);
  CHECK_THROWS_AS(run_reviewer(tape, p, enc), ShapeError);
}

TEST_CASE("single review step produces one thought") {
  Rng rng(23);
  for (ReviewerVariant variant : {ReviewerVariant::attentive_input, ReviewerVariant::attentive_output}) {
    ReviewerParams p(make_config(variant, 1), 3, ScorerKind::dot);
    p.init(rng);
    Tape tape;
    EncoderOutput enc = random_encoding(tape, rng, 4, 3);
    ThoughtVectors tv = run_reviewer(tape, p, enc);
    CHECK(tv.thoughts.size() == 1);
    CHECK(tape.value(tv.review).numel() == 3);
  }
}

TEST_CASE("thought count equals configured steps and trace rows sum to one") {
  Rng rng(29);
  for (ReviewerVariant variant : {ReviewerVariant::attentive_input, ReviewerVariant::attentive_output}) {
    for (WeightTying tying : {WeightTying::tied, WeightTying::untied}) {
      ReviewerParams p(make_config(variant, 5, tying), 3, ScorerKind::mlp, 4);
      p.init(rng);
      Tape tape;
      EncoderOutput enc = random_encoding(tape, rng, 4, 3);
      ThoughtVectors tv = run_reviewer(tape, p, enc);
      CHECK(tv.thoughts.size() == 5);
      REQUIRE(tv.trace.size() == 5);
      for (Var row : tv.trace) {
        double sum = 0.0;
        for (double w : tape.value(row).values()) sum += w;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("untied reviewer with equal unit weights matches tied") {
  Rng rng(31);
  ReviewerParams tied(make_config(ReviewerVariant::attentive_input, 4, WeightTying::tied), 3,
                      ScorerKind::mlp, 4);
  tied.init(rng);
  ReviewerParams untied(make_config(ReviewerVariant::attentive_input, 4, WeightTying::untied), 3,
                        ScorerKind::mlp, 4);
  untied.scorer = tied.scorer;
  untied.wprime = tied.wprime;
  for (LstmParams& u : untied.units) u = tied.units[0];
  Rng enc_rng(33);
  Tape tape;
  EncoderOutput enc = random_encoding(tape, enc_rng, 4, 3);
  ThoughtVectors a = run_reviewer(tape, tied, enc);
  ThoughtVectors b = run_reviewer(tape, untied, enc);
  for (int t = 0; t < 4; ++t) CHECK(tape.value(a.thoughts[t]) == tape.value(b.thoughts[t]));
  CHECK(tape.value(a.review) == tape.value(b.review));
}

TEST_CASE("untied lstm stack has steps times the tied parameter count") {
  ReviewerParams tied(make_config(ReviewerVariant::attentive_input, 6, WeightTying::tied), 5,
                      ScorerKind::dot);
  ReviewerParams untied(make_config(ReviewerVariant::attentive_input, 6, WeightTying::untied), 5,
                        ScorerKind::dot);
  auto stack_numel = [](const ReviewerParams& p) {
    std::int64_t n = 0;
    for (const LstmParams& u : p.units) n += u.wx.numel() + u.wh.numel() + u.b.numel();
    return n;
  };
  CHECK(stack_numel(untied) == 6 * stack_numel(tied));
}

TEST_CASE("discriminative scores single step and domination") {
  Rng rng(37);
  LinearParams head(3, 4);
  head.init(rng);
  Tape tape;
  Var f0 = tape.constant(Tensor::uniform({3}, rng, -1.0, 1.0));
  {
    std::vector<Var> thoughts{f0};
    Var s = discriminative_scores(tape, head, thoughts);
    CHECK(tape.value(s) == tape.value(linear(tape, head, f0)));
  }
  {
    LinearParams id(2, 2);
    id.w = Tensor::identity(2);
    Var lo = tape.constant(Tensor({2}, {-1.0, -2.0}));
    Var hi = tape.constant(Tensor({2}, {5.0, 6.0}));
    std::vector<Var> thoughts{lo, hi};
    Var s = discriminative_scores(tape, id, thoughts);
    CHECK(tape.value(s) == Tensor({2}, {5.0, 6.0}));
  }
}

TEST_CASE("discriminative scores pool per word maxima") {
  Tape tape;
  LinearParams id(2, 2);
  id.w = Tensor::identity(2);
  std::vector<Var> thoughts{tape.constant(Tensor({2}, {1.0, 5.0})),
                            tape.constant(Tensor({2}, {4.0, 2.0}))};
  Var s = discriminative_scores(tape, id, thoughts);
  CHECK(tape.value(s) == Tensor({2}, {4.0, 5.0}));
}

TEST_CASE("max pool gradient flows only into the argmax step") {
  Tape tape;
  LinearParams id(2, 2);
  id.w = Tensor::identity(2);
  Tensor f0({2}, {1.0, 5.0});
  Tensor f1({2}, {4.0, 2.0});
  std::vector<Var> thoughts{tape.param(f0), tape.param(f1)};
  Var loss = tape.sum(discriminative_scores(tape, id, thoughts));
  tape.backward(loss);
  CHECK(tape.grad_of(f0) == Tensor({2}, {0.0, 1.0}));
  CHECK(tape.grad_of(f1) == Tensor({2}, {1.0, 0.0}));
}

TEST_CASE("reviewer passes finite differences in all variants") {
  Rng data_rng(41);
  Tensor enc_raw[3] = {Tensor::uniform({3}, data_rng, -1.0, 1.0),
                       Tensor::uniform({3}, data_rng, -1.0, 1.0),
                       Tensor::uniform({3}, data_rng, -1.0, 1.0)};
  for (ReviewerVariant variant : {ReviewerVariant::attentive_input, ReviewerVariant::attentive_output}) {
    for (WeightTying tying : {WeightTying::tied, WeightTying::untied}) {
      Rng rng(43);
      ReviewerConfig cfg = make_config(variant, 2, tying);
      cfg.discriminative = true;
      ReviewerParams p(cfg, 3, ScorerKind::mlp, 4, 5);
      p.init(rng);
      // Spread the score head out so the max pool is probed away from ties,
      // and give the scorer enough weight that its gradients sit well above
      // the finite-difference noise floor.
      p.disc.init(rng, 2.0);
      p.scorer.init(rng, 0.7);
      ParamRegistry reg;
      p.register_params(reg, "rev");
      auto report = finite_diff_check(
          [&](Tape& t) {
            EncoderOutput enc;
            for (const Tensor& e : enc_raw) enc.states.push_back(t.param(e));
            enc.context = enc.states.back();
            ThoughtVectors tv = run_reviewer(t, p, enc);
            Var acc = t.sum(tv.review);
            for (Var f : tv.thoughts) acc = t.add(acc, t.sum(t.tanh(f)));
            acc = t.add(acc, t.sum(t.tanh(discriminative_scores(t, p.disc, tv.thoughts))));
            return acc;
          },
          reg, 1e-5);
      CAPTURE(report.worst_param);
      CAPTURE(report.analytic);
      CAPTURE(report.numeric);
      CHECK(report.max_rel_error < 1e-4);
    }
  }
}
