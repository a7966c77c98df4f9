#include "revnet/model.hpp"

#include "revnet/errors.hpp"

namespace revnet {

Model::Model(const ModelConfig& config_) : config(config_) {
  if (config.vocab <= kNumSpecial) {
    throw ConfigError("vocabulary size must exceed the " + std::to_string(kNumSpecial) +
                      " special tokens");
  }
  if (config.embed_dim < 1 || config.hidden_dim < 1) {
    throw ConfigError("embed_dim and hidden_dim must be >= 1");
  }
  switch (config.encoder) {
    case EncoderKind::rnn:
      src_emb = EmbeddingParams(config.vocab, config.embed_dim);
      rnn_enc = RnnEncoderParams(config.embed_dim, config.hidden_dim);
      break;
    case EncoderKind::bidir:
      src_emb = EmbeddingParams(config.vocab, config.embed_dim);
      bidir_enc = BidirEncoderParams(config.embed_dim, config.hidden_dim);
      break;
    case EncoderKind::grid:
      if (config.grid_dim < 1) throw ConfigError("grid encoder requires grid_dim");
      grid_enc = GridEncoderParams(config.grid_dim, config.grid_context_dim, config.hidden_dim);
      break;
  }
  if (config.kind == ModelKind::review) {
    reviewer = ReviewerParams(config.reviewer, config.hidden_dim, config.scorer, config.mlp_hidden,
                              config.reviewer.discriminative ? config.vocab : 0);
  }
  decoder = DecoderParams(config.hidden_dim, config.embed_dim, config.vocab, config.scorer,
                          config.mlp_hidden, config.kind != ModelKind::encdec);
}

void Model::init(Rng& rng, double scale) {
  switch (config.encoder) {
    case EncoderKind::rnn:
      src_emb.init(rng, scale);
      rnn_enc.init(rng, scale);
      break;
    case EncoderKind::bidir:
      src_emb.init(rng, scale);
      bidir_enc.init(rng, scale);
      break;
    case EncoderKind::grid:
      grid_enc.init(rng, scale);
      break;
  }
  if (config.kind == ModelKind::review) reviewer.init(rng, scale);
  decoder.init(rng, scale);
}

ParamRegistry Model::registry() {
  ParamRegistry reg;
  switch (config.encoder) {
    case EncoderKind::rnn:
      src_emb.register_params(reg, "src_emb");
      rnn_enc.register_params(reg, "encoder");
      break;
    case EncoderKind::bidir:
      src_emb.register_params(reg, "src_emb");
      bidir_enc.register_params(reg, "encoder");
      break;
    case EncoderKind::grid:
      grid_enc.register_params(reg, "encoder");
      break;
  }
  if (config.kind == ModelKind::review) reviewer.register_params(reg, "reviewer");
  decoder.register_params(reg, "decoder");
  return reg;
}

EncoderOutput Model::encode_tokens(Tape& tape, std::span<const int> source) const {
  switch (config.encoder) {
    case EncoderKind::rnn: return encode_rnn(tape, rnn_enc, src_emb, source);
    case EncoderKind::bidir: return encode_bidir(tape, bidir_enc, src_emb, source);
    case EncoderKind::grid: break;
  }
  throw ConfigError("token input fed to a feature-grid encoder");
}

EncoderOutput Model::encode(Tape& tape, const Instance& inst) const {
  if (inst.grid) {
    if (config.encoder != EncoderKind::grid) {
      throw DataError("feature-grid instance fed to a token encoder");
    }
    return encode_grid(tape, grid_enc, *inst.grid);
  }
  return encode_tokens(tape, inst.source);
}

ThoughtVectors Model::think(Tape& tape, const EncoderOutput& enc) const {
  switch (config.kind) {
    case ModelKind::review: return run_reviewer(tape, reviewer, enc);
    case ModelKind::encdec_attn: return {enc.states, enc.context, {}};
    case ModelKind::encdec: return {{}, enc.context, {}};
  }
  throw ConfigError("unknown model kind");
}

ThoughtVectors Model::forward(Tape& tape, const Instance& inst) const {
  return think(tape, encode(tape, inst));
}

}  // namespace revnet
