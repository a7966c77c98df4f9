#include "revnet/encoder.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "revnet/errors.hpp"

namespace revnet {

EncoderOutput encode_rnn(Tape& tape, const RnnEncoderParams& p, const EmbeddingParams& emb,
                         std::span<const int> tokens) {
  if (tokens.empty()) throw DataError("encode_rnn: empty token sequence");
  EncoderOutput out;
  out.states.reserve(tokens.size());
  LstmState s = zero_state(tape, p.lstm.hidden_dim);
  for (int id : tokens) {
    s = lstm_step(tape, p.lstm, tape.embed(tape.param(emb.table), id), s);
    out.states.push_back(s.hidden);
  }
  out.context = out.states.back();
  return out;
}

void BidirEncoderParams::init(Rng& rng, double scale) {
  fwd.init(rng, scale);
  bwd.init(rng, scale);
  proj.init(rng, scale);
}

void BidirEncoderParams::register_params(ParamRegistry& reg, const std::string& prefix) {
  fwd.register_params(reg, prefix + ".fwd");
  bwd.register_params(reg, prefix + ".bwd");
  proj.register_params(reg, prefix + ".proj");
}

EncoderOutput encode_bidir(Tape& tape, const BidirEncoderParams& p, const EmbeddingParams& emb,
                           std::span<const int> tokens) {
  if (tokens.empty()) throw DataError("encode_bidir: empty token sequence");
  const int n = static_cast<int>(tokens.size());
  std::vector<Var> fwd_h(n), bwd_h(n);
  LstmState f = zero_state(tape, p.fwd.hidden_dim);
  for (int t = 0; t < n; ++t) {
    f = lstm_step(tape, p.fwd, tape.embed(tape.param(emb.table), tokens[t]), f);
    fwd_h[t] = f.hidden;
  }
  LstmState b = zero_state(tape, p.bwd.hidden_dim);
  for (int t = n - 1; t >= 0; --t) {
    b = lstm_step(tape, p.bwd, tape.embed(tape.param(emb.table), tokens[t]), b);
    bwd_h[t] = b.hidden;
  }
  EncoderOutput out;
  out.states.reserve(tokens.size());
  for (int t = 0; t < n; ++t) {
    Var both[] = {fwd_h[t], bwd_h[t]};
    out.states.push_back(linear(tape, p.proj, tape.concat(both)));
  }
  Var final_both[] = {fwd_h[n - 1], bwd_h[0]};
  out.context = linear(tape, p.proj, tape.concat(final_both));
  return out;
}

FeatureGrid FeatureGrid::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature grid file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": missing header line");
  FeatureGrid grid;
  int has_context = 0;
  {
    std::istringstream header(line);
    std::string extra;
    if (!(header >> grid.rows >> grid.dim >> has_context) || (header >> extra)) {
      throw DataError(path + ": header must be 'rows dim has_context'");
    }
  }
  if (grid.rows < 1 || grid.dim < 1 || (has_context != 0 && has_context != 1)) {
    throw DataError(path + ": invalid header values");
  }
  grid.values.reserve(static_cast<std::size_t>(grid.rows) * static_cast<std::size_t>(grid.dim));
  for (int r = 0; r < grid.rows; ++r) {
    if (!std::getline(in, line)) throw DataError(path + ": expected " + std::to_string(grid.rows) + " rows");
    std::istringstream row(line);
    double v = 0.0;
    int count = 0;
    while (row >> v) {
      grid.values.push_back(v);
      ++count;
    }
    if (!row.eof()) throw DataError(path + ": non-numeric value in row " + std::to_string(r));
    if (count != grid.dim) {
      throw DataError(path + ": row " + std::to_string(r) + " has " + std::to_string(count) +
                      " values, expected " + std::to_string(grid.dim));
    }
  }
  if (has_context) {
    if (!std::getline(in, line)) throw DataError(path + ": missing context line");
    std::istringstream ctx(line);
    double v = 0.0;
    while (ctx >> v) grid.context.push_back(v);
    if (!ctx.eof()) throw DataError(path + ": non-numeric value in context line");
    if (grid.context.empty()) throw DataError(path + ": empty context line");
  }
  return grid;
}

void FeatureGrid::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write feature grid file: " + path);
  char buf[40];
  out << rows << ' ' << dim << ' ' << (has_context() ? 1 : 0) << '\n';
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < dim; ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", values[static_cast<std::size_t>(r) * dim + c]);
      out << (c ? " " : "") << buf;
    }
    out << '\n';
  }
  if (has_context()) {
    for (std::size_t i = 0; i < context.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", context[i]);
      out << (i ? " " : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

GridEncoderParams::GridEncoderParams(int in_dim_, int context_in_dim_, int hidden_dim_)
    : in_dim(in_dim_), context_in_dim(context_in_dim_), hidden_dim(hidden_dim_) {
  if (projects_states()) state_proj = LinearParams(in_dim, hidden_dim);
  if (projects_context()) context_proj = LinearParams(context_in_dim, hidden_dim);
}

void GridEncoderParams::init(Rng& rng, double scale) {
  if (projects_states()) state_proj.init(rng, scale);
  if (projects_context()) context_proj.init(rng, scale);
}

void GridEncoderParams::register_params(ParamRegistry& reg, const std::string& prefix) {
  if (projects_states()) state_proj.register_params(reg, prefix + ".state_proj");
  if (projects_context()) context_proj.register_params(reg, prefix + ".context_proj");
}

EncoderOutput encode_grid(Tape& tape, const GridEncoderParams& p, const FeatureGrid& grid) {
  if (grid.dim != p.in_dim) {
    throw DataError("feature grid dim " + std::to_string(grid.dim) + " does not match encoder in_dim " +
                    std::to_string(p.in_dim));
  }
  EncoderOutput out;
  out.states.reserve(static_cast<std::size_t>(grid.rows));
  for (int r = 0; r < grid.rows; ++r) {
    Tensor row({p.in_dim});
    for (int c = 0; c < p.in_dim; ++c) row[c] = grid.values[static_cast<std::size_t>(r) * grid.dim + c];
    Var v = tape.constant(std::move(row));
    out.states.push_back(p.projects_states() ? linear(tape, p.state_proj, v) : v);
  }
  if (grid.has_context()) {
    if (static_cast<int>(grid.context.size()) != (p.context_in_dim > 0 ? p.context_in_dim : p.hidden_dim)) {
      throw DataError("feature grid context dim " + std::to_string(grid.context.size()) +
                      " does not match encoder configuration");
    }
    Tensor ctx({static_cast<int>(grid.context.size())});
    for (std::size_t i = 0; i < grid.context.size(); ++i) ctx[i] = grid.context[i];
    Var v = tape.constant(std::move(ctx));
    out.context = p.projects_context() ? linear(tape, p.context_proj, v) : v;
  } else {
    Var sum = out.states[0];
    for (int r = 1; r < grid.rows; ++r) sum = tape.add(sum, out.states[r]);
    out.context = tape.scale(sum, 1.0 / grid.rows);
  }
  return out;
}

}  // namespace revnet
