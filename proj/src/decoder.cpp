#include "revnet/decoder.hpp"

#include <algorithm>

#include "revnet/errors.hpp"

namespace revnet {

DecoderParams::DecoderParams(int hidden_dim_, int embed_dim_, int vocab_, ScorerKind scorer_kind,
                             int mlp_hidden, bool use_attention_)
    : hidden_dim(hidden_dim_),
      embed_dim(embed_dim_),
      vocab(vocab_),
      use_attention(use_attention_),
      lstm(hidden_dim_ + embed_dim_, hidden_dim_),
      out(hidden_dim_, vocab_),
      emb(vocab_, embed_dim_) {
  if (use_attention) {
    scorer = scorer_kind == ScorerKind::dot ? ScorerParams::make_dot()
                                            : ScorerParams::make_mlp(hidden_dim_, hidden_dim_, mlp_hidden);
  }
}

void DecoderParams::init(Rng& rng, double scale) {
  lstm.init(rng, scale);
  if (use_attention) scorer.init(rng, scale);
  out.init(rng, scale);
  emb.init(rng, scale);
}

void DecoderParams::register_params(ParamRegistry& reg, const std::string& prefix) {
  lstm.register_params(reg, prefix + ".lstm");
  if (use_attention) scorer.register_params(reg, prefix + ".scorer");
  out.register_params(reg, prefix + ".out");
  emb.register_params(reg, prefix + ".emb");
}

LstmState init_state(Tape& tape, const ThoughtVectors& thoughts) {
  (void)tape;
  return {thoughts.review, thoughts.review};
}

DecodeStep decode_step(Tape& tape, const DecoderParams& p, std::span<const Var> thoughts,
                       const LstmState& prev, int prev_token) {
  Var context;
  Var weights;
  if (p.use_attention) {
    Attention att = attend(tape, p.scorer, thoughts, prev.hidden);
    context = att.context;
    weights = att.weights;
  } else {
    context = tape.zeros(p.hidden_dim);
    weights = tape.constant(Tensor({1}, {1.0}));
  }
  Var input_parts[] = {context, tape.embed(tape.param(p.emb.table), prev_token)};
  LstmState state = lstm_step(tape, p.lstm, tape.concat(input_parts), prev);
  Var logits = linear(tape, p.out, state.hidden);
  return {state, tape.log_softmax(logits), tape.softmax(logits), weights};
}

namespace {

int argmax_lowest(const Tensor& values) {
  int best = 0;
  for (std::int64_t i = 1; i < values.numel(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

double rank_score(const Hypothesis& h, bool length_normalize) {
  if (!length_normalize) return h.log_prob;
  return h.log_prob / static_cast<double>(std::max<std::size_t>(std::size_t{1}, h.tokens.size()));
}

}  // namespace

std::vector<int> greedy_decode(Tape& tape, const DecoderParams& p, const ThoughtVectors& thoughts,
                               int max_len) {
  if (max_len < 1) throw ConfigError("greedy_decode: max_len must be >= 1");
  std::vector<int> out;
  LstmState state = init_state(tape, thoughts);
  int prev = kBos;
  for (int t = 0; t < max_len; ++t) {
    DecodeStep step = decode_step(tape, p, thoughts.thoughts, state, prev);
    int next = argmax_lowest(tape.value(step.probs));
    if (next == kEos) break;
    out.push_back(next);
    state = step.state;
    prev = next;
  }
  return out;
}

std::vector<int> Hypothesis::surface() const {
  std::vector<int> s = tokens;
  if (!s.empty() && s.back() == kEos) s.pop_back();
  return s;
}

std::vector<Hypothesis> beam_search(Tape& tape, const DecoderParams& p,
                                    const ThoughtVectors& thoughts, const BeamOptions& opt) {
  if (opt.beam < 1) throw ConfigError("beam_search: beam must be >= 1");
  if (opt.max_len < 1) throw ConfigError("beam_search: max_len must be >= 1");

  struct Live {
    std::vector<int> tokens;
    double log_prob = 0.0;
    LstmState state;
  };
  std::vector<Live> live(1);
  live[0].state = init_state(tape, thoughts);
  std::vector<Hypothesis> pool;

  for (int t = 0; t < opt.max_len && !live.empty(); ++t) {
    struct Candidate {
      double log_prob;
      const Live* parent;
      int token;
      LstmState state;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(live.size() * static_cast<std::size_t>(p.vocab));
    for (const Live& h : live) {
      int prev = h.tokens.empty() ? kBos : h.tokens.back();
      DecodeStep step = decode_step(tape, p, thoughts.thoughts, h.state, prev);
      const Tensor& logp = tape.value(step.log_probs);
      for (int v = 0; v < p.vocab; ++v) {
        candidates.push_back({h.log_prob + logp[v], &h, v, step.state});
      }
    }
    auto better = [](const Candidate& a, const Candidate& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      auto cmp = [](const std::vector<int>& x, int xt, const std::vector<int>& y, int yt) {
        const std::size_t nx = x.size() + 1, ny = y.size() + 1;
        for (std::size_t i = 0; i < std::min(nx, ny); ++i) {
          const int xv = i < x.size() ? x[i] : xt;
          const int yv = i < y.size() ? y[i] : yt;
          if (xv != yv) return xv < yv;
        }
        return nx < ny;
      };
      return cmp(a.parent->tokens, a.token, b.parent->tokens, b.token);
    };
    const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(opt.beam), candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);
    candidates.resize(keep);

    std::vector<Live> next_live;
    for (const Candidate& c : candidates) {
      std::vector<int> tokens = c.parent->tokens;
      tokens.push_back(c.token);
      if (c.token == kEos) {
        pool.push_back({std::move(tokens), c.log_prob, true});
      } else {
        next_live.push_back({std::move(tokens), c.log_prob, c.state});
      }
    }
    live = std::move(next_live);
  }
  for (Live& h : live) pool.push_back({std::move(h.tokens), h.log_prob, false});

  std::sort(pool.begin(), pool.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    const double sa = rank_score(a, opt.length_normalize);
    const double sb = rank_score(b, opt.length_normalize);
    if (sa != sb) return sa > sb;
    return a.tokens < b.tokens;
  });
  return pool;
}

double sequence_log_prob(Tape& tape, const DecoderParams& p, const ThoughtVectors& thoughts,
                         std::span<const int> tokens) {
  LstmState state = init_state(tape, thoughts);
  double total = 0.0;
  int prev = kBos;
  for (int id : tokens) {
    DecodeStep step = decode_step(tape, p, thoughts.thoughts, state, prev);
    total += tape.value(step.log_probs)[id];
    state = step.state;
    prev = id;
  }
  return total;
}

}  // namespace revnet
