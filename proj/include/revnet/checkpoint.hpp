#pragma once

#include <string>

#include "revnet/config.hpp"
#include "revnet/training.hpp"

namespace revnet {

// On-disk layout: 8-byte magic, little-endian u32 format version, little-endian
// u64 manifest length, UTF-8 JSON manifest, then the concatenated tensor
// payloads as raw little-endian IEEE-754 doubles in manifest order. The
// manifest carries the run config, the vocabulary, and one shape-tagged entry
// per named tensor. Optimizer accumulators ride along under "opt.G." names.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  Vocab vocab;
  Model model;
  std::vector<Tensor> opt_accumulators;  // empty when none were saved
  bool has_optimizer = false;
};

void save_checkpoint(const std::string& path, const RunConfig& config, const Vocab& vocab,
                     Model& model, const AdaGrad* opt = nullptr);

// A version or structure mismatch is a hard error; tensor bytes round-trip
// bit-exactly.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace revnet
