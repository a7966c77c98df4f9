#pragma once

#include <span>
#include <string>
#include <vector>

#include "revnet/nn.hpp"

namespace revnet {

// Encoded source: hidden states H (one per position) and the context vector c.
struct EncoderOutput {
  Var context;
  std::vector<Var> states;

  int length() const { return static_cast<int>(states.size()); }
};

struct RnnEncoderParams {
  LstmParams lstm;

  RnnEncoderParams() = default;
  RnnEncoderParams(int embed_dim, int hidden_dim) : lstm(embed_dim, hidden_dim) {}

  void init(Rng& rng, double scale = 0.08) { lstm.init(rng, scale); }
  void register_params(ParamRegistry& reg, const std::string& prefix) {
    lstm.register_params(reg, prefix + ".lstm");
  }
};

EncoderOutput encode_rnn(Tape& tape, const RnnEncoderParams& p, const EmbeddingParams& emb,
                         std::span<const int> tokens);

// Forward and backward passes concatenated per position, then projected back
// to hidden_dim so downstream modules see one state width.
struct BidirEncoderParams {
  LstmParams fwd;
  LstmParams bwd;
  LinearParams proj;

  BidirEncoderParams() = default;
  BidirEncoderParams(int embed_dim, int hidden_dim)
      : fwd(embed_dim, hidden_dim), bwd(embed_dim, hidden_dim), proj(2 * hidden_dim, hidden_dim) {}

  void init(Rng& rng, double scale = 0.08);
  void register_params(ParamRegistry& reg, const std::string& prefix);
};

EncoderOutput encode_bidir(Tape& tape, const BidirEncoderParams& p, const EmbeddingParams& emb,
                           std::span<const int> tokens);

// Precomputed feature vectors, e.g. convolutional columns for an image.
struct FeatureGrid {
  int rows = 0;
  int dim = 0;
  std::vector<double> values;
  std::vector<double> context;

  bool has_context() const { return !context.empty(); }

  static FeatureGrid load(const std::string& path);
  void save(const std::string& path) const;
};

struct GridEncoderParams {
  int in_dim = 0;
  int context_in_dim = 0;
  int hidden_dim = 0;
  LinearParams state_proj;
  LinearParams context_proj;

  GridEncoderParams() = default;
  GridEncoderParams(int in_dim, int context_in_dim, int hidden_dim);

  bool projects_states() const { return in_dim != hidden_dim; }
  bool projects_context() const { return context_in_dim > 0 && context_in_dim != hidden_dim; }

  void init(Rng& rng, double scale = 0.08);
  void register_params(ParamRegistry& reg, const std::string& prefix);
};

EncoderOutput encode_grid(Tape& tape, const GridEncoderParams& p, const FeatureGrid& grid);

}  // namespace revnet
