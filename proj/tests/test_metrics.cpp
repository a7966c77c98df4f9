#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "revnet/errors.hpp"
#include "revnet/metrics.hpp"
#include "revnet/model.hpp"

using namespace revnet;

namespace {

ModelConfig small_config(int vocab) {
  ModelConfig cfg;
  cfg.kind = ModelKind::encdec;
  cfg.encoder = EncoderKind::rnn;
  cfg.vocab = vocab;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.scorer = ScorerKind::dot;
  return cfg;
}

// All weights zero: every step emits softmax(logits) regardless of context.
Model fixed_prob_model(int vocab, const std::vector<double>& logits) {
  Model model(small_config(vocab));
  for (const ParamRef& ref : model.registry()) {
    for (double& x : ref.tensor->values()) x = 0.0;
  }
  REQUIRE(static_cast<int>(logits.size()) == vocab);
  for (int v = 0; v < vocab; ++v) model.decoder.out.b[v] = logits[v];
  return model;
}

Instance make_instance(std::vector<int> source, std::vector<int> target_words) {
  Instance inst;
  inst.source = std::move(source);
  inst.target = std::move(target_words);
  inst.target.push_back(kEos);
  return inst;
}

std::vector<std::string> words(std::initializer_list<const char*> list) {
  return std::vector<std::string>(list.begin(), list.end());
}

}  // namespace

TEST_CASE("eval_loglik of a uniform model is -(length) * log(V)") {
  const int V = 8;
  Model model = fixed_prob_model(V, std::vector<double>(V, 0.0));
  std::vector<Instance> split = {make_instance({4, 5}, {4, 6})};
  CHECK(eval_loglik(model, split) == doctest::Approx(-2.0 * std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("eval_loglik excludes the terminal <eos> and averages per comment") {
  const int V = 8;
  Model model = fixed_prob_model(V, std::vector<double>(V, 0.0));
  std::vector<Instance> split = {make_instance({4}, {4, 6}), make_instance({4}, {5})};
  const double expect = (-2.0 * std::log(8.0) + -1.0 * std::log(8.0)) / 2.0;
  CHECK(eval_loglik(model, split) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("eval_loglik approaches zero for a model peaked on the gold token") {
  const int V = 8;
  std::vector<double> logits(V, 0.0);
  logits[5] = 60.0;
  Model model = fixed_prob_model(V, logits);
  std::vector<Instance> split = {make_instance({4}, {5, 5, 5})};
  const double ll = eval_loglik(model, split);
  CHECK(ll <= 0.0);
  CHECK(ll == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("eval_loglik is finite and nonpositive for a random model") {
  ModelConfig cfg = small_config(9);
  cfg.kind = ModelKind::review;
  cfg.reviewer.steps = 2;
  Model model(cfg);
  Rng rng(11);
  model.init(rng);
  std::vector<Instance> split = {make_instance({4, 7, 5}, {6, 8}), make_instance({8}, {4})};
  const double ll = eval_loglik(model, split);
  CHECK(std::isfinite(ll));
  CHECK(ll <= 0.0);
}

TEST_CASE("eval_loglik rejects an empty split") {
  Model model = fixed_prob_model(8, std::vector<double>(8, 0.0));
  std::vector<Instance> empty;
  CHECK_THROWS_AS(eval_loglik(model, empty), DataError);
}

TEST_CASE("mean_token_nll includes <eos> in the per-token average") {
  const int V = 8;
  Model model = fixed_prob_model(V, std::vector<double>(V, 0.0));
  std::vector<Instance> split = {make_instance({4}, {4, 6})};
  CHECK(mean_token_nll(model, split) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("token_accuracy counts teacher-forced argmax hits including <eos>") {
  const int V = 8;
  std::vector<double> logits(V, 0.0);
  logits[5] = 60.0;
  Model model = fixed_prob_model(V, logits);
  std::vector<Instance> split = {make_instance({4}, {5, 5})};
  CHECK(token_accuracy(model, split) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  std::vector<Instance> wrong = {make_instance({4}, {6})};
  CHECK(token_accuracy(model, wrong) == doctest::Approx(0.0));
}

namespace {

// Vocab {cat, car, dog} with ids fixed by frequency: cat=4, car=5, dog=6.
Vocab cat_car_dog_vocab() {
  std::vector<std::vector<std::string>> docs = {
      words({"cat", "cat", "cat"}), words({"car", "car"}), words({"dog"})};
  return Vocab::build(docs, 1);
}

// Fixed unigram model over that vocab; specials pushed to negligible mass.
Model cat_car_dog_model(double p_cat, double p_car, double p_dog) {
  std::vector<double> logits(7, -60.0);
  logits[4] = std::log(p_cat);
  logits[5] = std::log(p_car);
  logits[6] = std::log(p_dog);
  return fixed_prob_model(7, logits);
}

RawInstance raw_with_target(const std::string& target) {
  RawInstance raw;
  raw.source = "cat";
  raw.target = target;
  return raw;
}

}  // namespace

TEST_CASE("cs_k prefix enumeration on the cat/car/dog fixture") {
  Vocab vocab = cat_car_dog_vocab();
  REQUIRE(vocab.word(4) == "cat");
  REQUIRE(vocab.word(5) == "car");
  REQUIRE(vocab.word(6) == "dog");
  Model model = cat_car_dog_model(0.5, 0.2, 0.3);

  std::vector<RawInstance> tokenized = {raw_with_target("car")};
  std::vector<Instance> encoded = {make_instance({4}, {5})};

  // k=1: "" -> cat wins; "c"/"ca" -> cat still wins; full word needed.
  CHECK(cs_k(model, encoded, tokenized, vocab, 1) == doctest::Approx(0.0));
  // k=2: "" -> {cat, dog} above car; "c" -> {cat, car} so rank 2. n = 1.
  CHECK(cs_k(model, encoded, tokenized, vocab, 2) == doctest::Approx(2.0 / 3.0));
  // k=3: car is always within the top 3. n = 0.
  CHECK(cs_k(model, encoded, tokenized, vocab, 3) == doctest::Approx(1.0));
}

TEST_CASE("cs_k treats out-of-vocab gold words as unreachable") {
  Vocab vocab = cat_car_dog_vocab();
  Model model = cat_car_dog_model(0.5, 0.2, 0.3);

  std::vector<RawInstance> tokenized = {raw_with_target("car zebra")};
  std::vector<Instance> encoded = {make_instance({4}, {5, kUnk})};

  // "zebra" saves nothing; "car" saves 3 at k=3. Ratio = 3 / (3 + 5).
  CHECK(cs_k(model, encoded, tokenized, vocab, 3) == doctest::Approx(3.0 / 8.0));
}

TEST_CASE("cs_k averages the saving ratio per comment") {
  Vocab vocab = cat_car_dog_vocab();
  Model model = cat_car_dog_model(0.5, 0.2, 0.3);

  std::vector<RawInstance> tokenized = {raw_with_target("car"), raw_with_target("cat dog")};
  std::vector<Instance> encoded = {make_instance({4}, {5}), make_instance({4}, {4, 6})};

  // Comment 1 at k=2 saves 2/3. Comment 2: "cat" top-1 from "" (n=0, saves 3);
  // "dog" top-2 from "" (n=0, saves 3) -> ratio 1.
  const double expect = (2.0 / 3.0 + 1.0) / 2.0;
  CHECK(cs_k(model, encoded, tokenized, vocab, 2) == doctest::Approx(expect));
}

namespace {

// Independent prefix-enumeration oracle: materialise every candidate list,
// sort it, and look up the gold position.
double cs_oracle(const Model& model, std::span<const Instance> encoded,
                 std::span<const RawInstance> tokenized, const Vocab& vocab, int k) {
  double ratio_sum = 0.0;
  std::size_t comments = 0;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const Instance& inst = encoded[i];
    std::vector<std::string> gold = split_words(tokenized[i].target);
    const std::size_t nwords = std::min(gold.size(), inst.target.size() - 1);
    Tape tape(model.config.precision, false);
    ThoughtVectors tv = model.forward(tape, inst);
    LstmState state = init_state(tape, tv);
    int prev = kBos;
    long saved = 0;
    long total = 0;
    for (std::size_t t = 0; t < nwords; ++t) {
      const std::string& word = gold[t];
      const int gold_id = inst.target[t];
      const long L = static_cast<long>(word.size());
      DecodeStep step = decode_step(tape, model.decoder, tv.thoughts, state, prev);
      const Tensor& probs = tape.value(step.probs);
      long n = L;
      if (gold_id >= kNumSpecial && vocab.word(gold_id) == word) {
        for (long plen = 0; plen < L && n == L; ++plen) {
          std::vector<std::pair<double, int>> pool;
          for (int v = kNumSpecial; v < vocab.size(); ++v) {
            if (vocab.word(v).rfind(word.substr(0, static_cast<std::size_t>(plen)), 0) == 0) {
              pool.emplace_back(-probs[v], v);
            }
          }
          std::sort(pool.begin(), pool.end());
          for (std::size_t pos = 0; pos < pool.size(); ++pos) {
            if (pool[pos].second == gold_id && static_cast<int>(pos) < k) n = plen;
          }
        }
      }
      saved += L - n;
      total += L;
      state = step.state;
      prev = gold_id;
    }
    if (total > 0) {
      ratio_sum += static_cast<double>(saved) / static_cast<double>(total);
      ++comments;
    }
  }
  return ratio_sum / static_cast<double>(comments);
}

}  // namespace

TEST_CASE("cs_k matches a brute-force prefix oracle on a random model") {
  std::vector<std::vector<std::string>> docs = {
      words({"alpha", "alps", "album", "beta", "bet", "bell", "gamma", "gap"}),
      words({"alpha", "beta", "bet", "gap", "gap"})};
  Vocab vocab = Vocab::build(docs, 1);

  ModelConfig cfg = small_config(vocab.size());
  cfg.kind = ModelKind::review;
  cfg.reviewer.steps = 3;
  Model model(cfg);
  Rng rng(29);
  model.init(rng, 0.3);

  std::vector<RawInstance> tokenized = {raw_with_target("alpha bet gap"),
                                        raw_with_target("bell album"),
                                        raw_with_target("gamma gamma beta")};
  const Caps caps{30, 30};
  std::vector<Instance> encoded;
  for (const RawInstance& raw : tokenized) {
    RawInstance r = raw;
    r.source = "alpha beta";
    encoded.push_back(encode_instance(vocab, r, caps));
  }

  for (int k = 1; k <= 5; ++k) {
    CAPTURE(k);
    CHECK(cs_k(model, encoded, tokenized, vocab, k) ==
          doctest::Approx(cs_oracle(model, encoded, tokenized, vocab, k)).epsilon(1e-12));
  }
}

TEST_CASE("cs_k is monotone in k and bounded by [0,1]") {
  std::vector<std::vector<std::string>> docs = {
      words({"red", "reed", "rood", "road", "blue", "bled", "green", "grey"})};
  Vocab vocab = Vocab::build(docs, 1);

  ModelConfig cfg = small_config(vocab.size());
  Model model(cfg);
  Rng rng(7);
  model.init(rng, 0.4);

  std::vector<RawInstance> tokenized = {raw_with_target("red road grey"),
                                        raw_with_target("bled blue reed")};
  const Caps caps{30, 30};
  std::vector<Instance> encoded;
  for (const RawInstance& raw : tokenized) {
    RawInstance r = raw;
    r.source = "green";
    encoded.push_back(encode_instance(vocab, r, caps));
  }

  double prev = 0.0;
  for (int k = 1; k <= 5; ++k) {
    const double value = cs_k(model, encoded, tokenized, vocab, k);
    CAPTURE(k);
    CHECK(value >= prev - 1e-12);
    CHECK(value >= 0.0);
    CHECK(value <= 1.0);
    prev = value;
  }
}

TEST_CASE("cs_k validates its arguments") {
  Vocab vocab = cat_car_dog_vocab();
  Model model = cat_car_dog_model(0.5, 0.2, 0.3);
  std::vector<RawInstance> tokenized = {raw_with_target("car")};
  std::vector<Instance> encoded = {make_instance({4}, {5})};

  CHECK_THROWS_AS(cs_k(model, encoded, tokenized, vocab, 0), ConfigError);
  std::vector<Instance> two = {encoded[0], encoded[0]};
  CHECK_THROWS_AS(cs_k(model, two, tokenized, vocab, 1), DataError);
  std::vector<Instance> none;
  std::vector<RawInstance> no_raw;
  CHECK_THROWS_AS(cs_k(model, none, no_raw, vocab, 1), DataError);
}

TEST_CASE("bleu4 of a candidate equal to its reference is 1") {
  std::vector<std::vector<std::string>> cands = {words({"the", "cat", "sat", "on", "the", "mat"})};
  std::vector<std::vector<std::string>> refs = cands;
  BleuReport report = bleu4(cands, refs);
  CHECK(report.bleu == doctest::Approx(1.0));
  CHECK(report.brevity_penalty == doctest::Approx(1.0));
  for (double p : report.precisions) CHECK(p == doctest::Approx(1.0));
}

TEST_CASE("bleu4 clips repeated candidate unigrams against the reference count") {
  std::vector<std::vector<std::string>> cands = {words({"the", "the", "the"})};
  std::vector<std::vector<std::string>> refs = {words({"the", "cat"})};
  BleuReport report = bleu4(cands, refs);
  CHECK(report.precisions[0] == doctest::Approx(1.0 / 3.0));
  CHECK(report.precisions[1] == doctest::Approx(0.0));
  CHECK(report.bleu == doctest::Approx(0.0));
}

TEST_CASE("bleu4 without smoothing is zero when any order has no overlap") {
  std::vector<std::vector<std::string>> cands = {words({"a", "b", "c", "d", "e"})};
  std::vector<std::vector<std::string>> refs = {words({"a", "b", "x", "d", "e"})};
  BleuReport plain = bleu4(cands, refs);
  CHECK(plain.precisions[3] == doctest::Approx(0.0));
  CHECK(plain.bleu == doctest::Approx(0.0));

  BleuReport smoothed = bleu4(cands, refs, true);
  CHECK(smoothed.bleu > 0.0);
  CHECK(smoothed.precisions[3] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("bleu4 skips orders with no candidate n-grams and applies the brevity penalty") {
  std::vector<std::vector<std::string>> cands = {words({"a", "b"})};
  std::vector<std::vector<std::string>> refs = {words({"a", "b", "c"})};
  BleuReport report = bleu4(cands, refs);
  CHECK(report.precisions[0] == doctest::Approx(1.0));
  CHECK(report.precisions[1] == doctest::Approx(1.0));
  CHECK(report.precisions[2] == doctest::Approx(1.0));
  CHECK(report.precisions[3] == doctest::Approx(1.0));
  CHECK(report.brevity_penalty == doctest::Approx(std::exp(1.0 - 3.0 / 2.0)));
  CHECK(report.bleu == doctest::Approx(std::exp(-0.5)));
}

TEST_CASE("bleu4 takes the max reference count and the closest reference length") {
  std::vector<std::vector<std::string>> cands = {words({"the", "the"})};
  std::vector<std::vector<std::vector<std::string>>> refsets = {
      {words({"the", "the", "x"}), words({"the"})}};
  BleuReport report = bleu4(cands, refsets);
  CHECK(report.precisions[0] == doctest::Approx(1.0));
  // Lengths 3 and 1 are both at distance 1 from 2; the tie picks the shorter.
  CHECK(report.brevity_penalty == doctest::Approx(1.0));
}

TEST_CASE("bleu4 is invariant to the corpus instance order") {
  std::vector<std::vector<std::string>> cands = {words({"a", "b", "c", "d"}),
                                                 words({"x", "y", "z", "w", "v"})};
  std::vector<std::vector<std::string>> refs = {words({"a", "b", "c", "e"}),
                                                words({"x", "y", "q", "w", "v"})};
  BleuReport fwd = bleu4(cands, refs, true);
  std::vector<std::vector<std::string>> rcands = {cands[1], cands[0]};
  std::vector<std::vector<std::string>> rrefs = {refs[1], refs[0]};
  BleuReport rev = bleu4(rcands, rrefs, true);
  CHECK(fwd.bleu == rev.bleu);
  CHECK(fwd.brevity_penalty == rev.brevity_penalty);
  for (int n = 0; n < 4; ++n) CHECK(fwd.precisions[static_cast<std::size_t>(n)] == rev.precisions[static_cast<std::size_t>(n)]);
}

TEST_CASE("bleu4 validates its arguments") {
  std::vector<std::vector<std::string>> cands = {words({"a"})};
  std::vector<std::vector<std::string>> none;
  CHECK_THROWS_AS(bleu4(none, none), DataError);
  std::vector<std::vector<std::string>> refs2 = {words({"a"}), words({"b"})};
  CHECK_THROWS_AS(bleu4(cands, refs2), DataError);
  std::vector<std::vector<std::vector<std::string>>> empty_set = {{}};
  CHECK_THROWS_AS(bleu4(cands, empty_set), DataError);
}

TEST_CASE("eval_loglik agrees between the identity reduction and the attentive encoder-decoder") {
  const int V = 9;
  ModelConfig attn_cfg = small_config(V);
  attn_cfg.kind = ModelKind::encdec_attn;
  attn_cfg.scorer = ScorerKind::mlp;
  attn_cfg.mlp_hidden = 5;
  Model attn(attn_cfg);
  Rng rng(17);
  attn.init(rng);

  std::vector<Instance> split = {make_instance({4, 7, 5}, {6, 8}), make_instance({8, 4}, {4, 5, 7})};

  for (const Instance& inst : split) {
    ModelConfig rev_cfg = attn_cfg;
    rev_cfg.kind = ModelKind::review;
    rev_cfg.reviewer.variant = ReviewerVariant::identity_reduction;
    rev_cfg.reviewer.steps = static_cast<int>(inst.source.size());
    Model review(rev_cfg);
    review.src_emb = attn.src_emb;
    review.rnn_enc = attn.rnn_enc;
    review.decoder = attn.decoder;
    review.reviewer.set_select_context();

    std::vector<Instance> one = {inst};
    CHECK(eval_loglik(review, one) == doctest::Approx(eval_loglik(attn, one)).epsilon(1e-12));
  }
}
