#pragma once

#include <string>

#include "revnet/corpus.hpp"
#include "revnet/decoder.hpp"
#include "revnet/encoder.hpp"
#include "revnet/reviewer.hpp"

namespace revnet {

// review: encoder -> reviewer -> decoder over thought vectors.
// encdec_attn: decoder attends directly over encoder states, s0 = c.
// encdec: no attention at all, s0 = c.
enum class ModelKind { review, encdec_attn, encdec };

enum class EncoderKind { rnn, bidir, grid };

struct ModelConfig {
  ModelKind kind = ModelKind::review;
  EncoderKind encoder = EncoderKind::rnn;
  ReviewerConfig reviewer;
  int vocab = 0;
  int embed_dim = 50;
  int hidden_dim = 256;
  ScorerKind scorer = ScorerKind::mlp;
  int mlp_hidden = 512;
  int grid_dim = 0;
  int grid_context_dim = 0;
  Precision precision = Precision::f64;
};

struct Model {
  ModelConfig config;
  EmbeddingParams src_emb;
  RnnEncoderParams rnn_enc;
  BidirEncoderParams bidir_enc;
  GridEncoderParams grid_enc;
  ReviewerParams reviewer;
  DecoderParams decoder;

  explicit Model(const ModelConfig& config);

  void init(Rng& rng, double scale = 0.08);
  ParamRegistry registry();

  EncoderOutput encode_tokens(Tape& tape, std::span<const int> source) const;
  EncoderOutput encode(Tape& tape, const Instance& inst) const;
  ThoughtVectors think(Tape& tape, const EncoderOutput& enc) const;
  ThoughtVectors forward(Tape& tape, const Instance& inst) const;
};

}  // namespace revnet
