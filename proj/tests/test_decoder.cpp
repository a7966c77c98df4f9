#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "revnet/decoder.hpp"
#include "revnet/model.hpp"
#include "revnet/rng.hpp"

using namespace revnet;

namespace {

ThoughtVectors random_thoughts(Tape& tape, Rng& rng, int count, int dim) {
  ThoughtVectors tv;
  for (int i = 0; i < count; ++i) tv.thoughts.push_back(tape.constant(Tensor::uniform({dim}, rng, -1.0, 1.0)));
  tv.review = tape.constant(Tensor::uniform({dim}, rng, -1.0, 1.0));
  return tv;
}

std::vector<double> forced_log_probs(Tape& tape, const DecoderParams& p, const ThoughtVectors& tv,
                                     std::span<const int> tokens) {
  LstmState state = init_state(tape, tv);
  int prev = kBos;
  std::vector<double> out;
  for (int id : tokens) {
    DecodeStep step = decode_step(tape, p, tv.thoughts, state, prev);
    out.push_back(tape.value(step.log_probs)[id]);
    state = step.state;
    prev = id;
  }
  return out;
}

}  // namespace

TEST_CASE("single thought vector is the context at every step") {
  Rng rng(3);
  DecoderParams p(3, 2, 6, ScorerKind::mlp, 4);
  p.init(rng);
  Tape tape;
  ThoughtVectors tv = random_thoughts(tape, rng, 1, 3);
  LstmState state = init_state(tape, tv);
  int prev = kBos;
  for (int t = 0; t < 3; ++t) {
    DecodeStep step = decode_step(tape, p, tv.thoughts, state, prev);
    CHECK(tape.value(step.weights) == Tensor({1}, {1.0}));
    state = step.state;
    prev = t % p.vocab;
  }
}

TEST_CASE("step distribution sums to one") {
  Rng rng(5);
  DecoderParams p(4, 3, 7, ScorerKind::dot);
  p.init(rng);
  Tape tape;
  ThoughtVectors tv = random_thoughts(tape, rng, 3, 4);
  DecodeStep step = decode_step(tape, p, tv.thoughts, init_state(tape, tv), kBos);
  double sum = 0.0;
  for (double v : tape.value(step.probs).values()) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("decode step equals hand composition") {
  Rng rng(7);
  DecoderParams p(3, 2, 5, ScorerKind::dot);
  p.init(rng);
  Tape tape;
  ThoughtVectors tv = random_thoughts(tape, rng, 2, 3);
  LstmState prev = init_state(tape, tv);
  DecodeStep step = decode_step(tape, p, tv.thoughts, prev, kBos);

  Attention att = attend(tape, p.scorer, tv.thoughts, prev.hidden);
  Var parts[] = {att.context, tape.embed(tape.param(p.emb.table), kBos)};
  LstmState state = lstm_step(tape, p.lstm, tape.concat(parts), prev);
  Var dist = tape.softmax(linear(tape, p.out, state.hidden));
  CHECK(tape.value(step.probs) == tape.value(dist));
  CHECK(tape.value(step.state.hidden) == tape.value(state.hidden));
}

TEST_CASE("initial state mirrors the review vector") {
  Tape tape;
  ThoughtVectors tv;
  tv.thoughts.push_back(tape.zeros(4));
  tv.review = tape.zeros(4);
  LstmState s = init_state(tape, tv);
  CHECK(tape.value(s.cell) == Tensor({4}));
  CHECK(tape.value(s.hidden) == Tensor({4}));

  ThoughtVectors tv2;
  tv2.review = tape.constant(Tensor({2}, {0.5, -0.5}));
  LstmState s2 = init_state(tape, tv2);
  CHECK(tape.value(s2.cell) == Tensor({2}, {0.5, -0.5}));
  CHECK(tape.value(s2.hidden) == Tensor({2}, {0.5, -0.5}));
}

TEST_CASE("greedy stops immediately when end dominates") {
  Rng rng(9);
  DecoderParams p(3, 2, 6, ScorerKind::dot);
  p.init(rng);
  p.out.w.fill(0.0);
  p.out.b.fill(-5.0);
  p.out.b[kEos] = 3.0;
  Tape tape(Precision::f64, false);
  ThoughtVectors tv = random_thoughts(tape, rng, 2, 3);
  CHECK(greedy_decode(tape, p, tv, 10).empty());
}

TEST_CASE("greedy breaks ties toward the lower id") {
  Rng rng(11);
  DecoderParams p(3, 2, 6, ScorerKind::dot);
  p.init(rng);
  p.out.w.fill(0.0);
  p.out.b.fill(-5.0);
  p.out.b[4] = 2.0;
  p.out.b[5] = 2.0;
  Tape tape(Precision::f64, false);
  ThoughtVectors tv = random_thoughts(tape, rng, 2, 3);
  CHECK(greedy_decode(tape, p, tv, 4) == std::vector<int>{4, 4, 4, 4});
}

TEST_CASE("greedy matches per step argmax enumeration") {
  Rng rng(13);
  DecoderParams p(3, 2, 6, ScorerKind::dot);
  p.init(rng, 0.5);
  Tape tape(Precision::f64, false);
  ThoughtVectors tv = random_thoughts(tape, rng, 2, 3);
  std::vector<int> got = greedy_decode(tape, p, tv, 5);

  std::vector<int> expect;
  LstmState state = init_state(tape, tv);
  int prev = kBos;
  for (int t = 0; t < 5; ++t) {
    DecodeStep step = decode_step(tape, p, tv.thoughts, state, prev);
    const Tensor& probs = tape.value(step.probs);
    int best = 0;
    for (int v = 1; v < p.vocab; ++v) {
      if (probs[v] > probs[best]) best = v;
    }
    if (best == kEos) break;
    expect.push_back(best);
    state = step.state;
    prev = best;
  }
  CHECK(got == expect);
}

TEST_CASE("beam one equals greedy") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    Rng rng(seed);
    DecoderParams p(3, 2, 6, ScorerKind::dot);
    p.init(rng, 0.6);
    Tape tape(Precision::f64, false);
    ThoughtVectors tv = random_thoughts(tape, rng, 2, 3);
    std::vector<int> greedy = greedy_decode(tape, p, tv, 6);
    BeamOptions opt;
    opt.beam = 1;
    opt.max_len = 6;
    std::vector<Hypothesis> pool = beam_search(tape, p, tv, opt);
    REQUIRE(!pool.empty());
    CHECK(pool.front().surface() == greedy);
  }
}

TEST_CASE("beam three matches exhaustive enumeration on a tiny vocabulary") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 101);
    DecoderParams p(3, 2, 3, ScorerKind::dot);
    p.init(rng, 0.8);
    Tape tape(Precision::f64, false);
    ThoughtVectors tv = random_thoughts(tape, rng, 2, 3);

    std::vector<std::vector<int>> complete;
    for (int a = 0; a < 3; ++a) {
      if (a == kEos) {
        complete.push_back({a});
        continue;
      }
      for (int b = 0; b < 3; ++b) {
        if (b == kEos) {
          complete.push_back({a, b});
          continue;
        }
        for (int c = 0; c < 3; ++c) complete.push_back({a, b, c});
      }
    }
    std::vector<int> best;
    double best_score = -1e300;
    for (const auto& seq : complete) {
      double score = sequence_log_prob(tape, p, tv, seq);
      if (score > best_score || (score == best_score && seq < best)) {
        best_score = score;
        best = seq;
      }
    }

    BeamOptions opt;
    opt.beam = 3;
    opt.max_len = 3;
    std::vector<Hypothesis> pool = beam_search(tape, p, tv, opt);
    REQUIRE(!pool.empty());
    CHECK(pool.front().tokens == best);
    CHECK(pool.front().log_prob == doctest::Approx(best_score).epsilon(1e-10));
  }
}

TEST_CASE("wider beams never lose completed score") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    Rng rng(seed * 7 + 1);
    DecoderParams p(4, 2, 5, ScorerKind::dot);
    p.init(rng, 0.7);
    Tape tape(Precision::f64, false);
    ThoughtVectors tv = random_thoughts(tape, rng, 2, 4);
    auto best_score = [&](int beam) {
      BeamOptions opt;
      opt.beam = beam;
      opt.max_len = 4;
      std::vector<Hypothesis> pool = beam_search(tape, p, tv, opt);
      REQUIRE(!pool.empty());
      return pool.front().log_prob;
    };
    CHECK(best_score(4) >= best_score(2) - 1e-12);
  }
}

TEST_CASE("hypothesis scores survive recomputation") {
  Rng rng(17);
  DecoderParams p(3, 2, 5, ScorerKind::mlp, 4);
  p.init(rng, 0.5);
  Tape tape(Precision::f64, false);
  ThoughtVectors tv = random_thoughts(tape, rng, 3, 3);
  BeamOptions opt;
  opt.beam = 3;
  opt.max_len = 4;
  for (const Hypothesis& h : beam_search(tape, p, tv, opt)) {
    CHECK(sequence_log_prob(tape, p, tv, h.tokens) == doctest::Approx(h.log_prob).epsilon(1e-10));
    CHECK(h.completed == (!h.tokens.empty() && h.tokens.back() == kEos));
  }
}

TEST_CASE("length normalized ranking orders the pool by averaged score") {
  Rng rng(19);
  DecoderParams p(3, 2, 5, ScorerKind::dot);
  p.init(rng, 0.5);
  Tape tape(Precision::f64, false);
  ThoughtVectors tv = random_thoughts(tape, rng, 2, 3);
  BeamOptions opt;
  opt.beam = 3;
  opt.max_len = 4;
  opt.length_normalize = true;
  std::vector<Hypothesis> pool = beam_search(tape, p, tv, opt);
  auto norm = [](const Hypothesis& h) {
    return h.log_prob / static_cast<double>(std::max<std::size_t>(std::size_t{1}, h.tokens.size()));
  };
  for (std::size_t i = 1; i < pool.size(); ++i) CHECK(norm(pool[i - 1]) >= norm(pool[i]) - 1e-12);
}

TEST_CASE("identity reduction review net matches the attentive baseline") {
  Rng rng(23);
  ModelConfig base;
  base.kind = ModelKind::encdec_attn;
  base.encoder = EncoderKind::rnn;
  base.vocab = 8;
  base.embed_dim = 3;
  base.hidden_dim = 4;
  base.scorer = ScorerKind::dot;
  Model attn(base);
  attn.init(rng);

  const std::vector<int> source{5, 7, 4};
  ModelConfig red = base;
  red.kind = ModelKind::review;
  red.reviewer.variant = ReviewerVariant::identity_reduction;
  red.reviewer.steps = static_cast<int>(source.size());
  Model review(red);
  review.init(rng);
  review.src_emb = attn.src_emb;
  review.rnn_enc = attn.rnn_enc;
  review.decoder = attn.decoder;
  review.reviewer.set_select_context();

  const std::vector<int> target{6, 5, kEos};
  Tape tape(Precision::f64, false);
  Instance inst;
  inst.source = source;
  ThoughtVectors tva = attn.forward(tape, inst);
  ThoughtVectors tvr = review.forward(tape, inst);
  std::vector<double> la = forced_log_probs(tape, attn.decoder, tva, target);
  std::vector<double> lr = forced_log_probs(tape, review.decoder, tvr, target);
  REQUIRE(la.size() == lr.size());
  for (std::size_t i = 0; i < la.size(); ++i) CHECK(std::abs(la[i] - lr[i]) <= 1e-10);
}

TEST_CASE("zeroed thoughts and review vector c reduce to the plain encoder decoder") {
  Rng rng(29);
  ModelConfig base;
  base.kind = ModelKind::encdec;
  base.encoder = EncoderKind::rnn;
  base.vocab = 8;
  base.embed_dim = 3;
  base.hidden_dim = 4;
  base.scorer = ScorerKind::dot;
  Model plain(base);
  plain.init(rng);

  ModelConfig att = base;
  att.kind = ModelKind::encdec_attn;
  Model attn(att);
  attn.init(rng);
  attn.src_emb = plain.src_emb;
  attn.rnn_enc = plain.rnn_enc;
  attn.decoder.lstm = plain.decoder.lstm;
  attn.decoder.out = plain.decoder.out;
  attn.decoder.emb = plain.decoder.emb;

  const std::vector<int> source{5, 7};
  const std::vector<int> target{6, 4, kEos};
  Instance inst;
  inst.source = source;
  Tape tape(Precision::f64, false);

  ThoughtVectors tvp = plain.forward(tape, inst);
  EncoderOutput enc = attn.encode(tape, inst);
  ThoughtVectors zeroed;
  for (int t = 0; t < 3; ++t) zeroed.thoughts.push_back(tape.zeros(4));
  zeroed.review = enc.context;

  std::vector<double> lp = forced_log_probs(tape, plain.decoder, tvp, target);
  std::vector<double> lz = forced_log_probs(tape, attn.decoder, zeroed, target);
  REQUIRE(lp.size() == lz.size());
  for (std::size_t i = 0; i < lp.size(); ++i) CHECK(std::abs(lp[i] - lz[i]) <= 1e-10);
}
