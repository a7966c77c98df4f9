#include "revnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "revnet/errors.hpp"

namespace revnet {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'R', 'V', 'N', 'T', 'C', 'K', 'P', 'T'};
constexpr const char* kOptPrefix = "opt.G.";

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_doubles(std::string& out, std::span<const double> values) {
  for (double d : values) append_u64(out, std::bit_cast<std::uint64_t>(d));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  const char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw DataError("checkpoint " + path_ + " is truncated");
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    const char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }

  void doubles(std::span<double> out) {
    const char* p = take(out.size() * 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint64_t v = 0;
      for (int b = 0; b < 8; ++b) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[8 * i + b])) << (8 * b);
      }
      out[i] = std::bit_cast<double>(v);
    }
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::string& bytes_;
  const std::string& path_;
  std::size_t pos_ = 0;
};

json tensor_entry(const std::string& name, const Tensor& t, std::int64_t offset) {
  json e;
  e["name"] = name;
  e["shape"] = t.shape();
  e["offset"] = offset;
  e["count"] = t.numel();
  return e;
}

struct ManifestTensor {
  std::string name;
  Shape shape;
  std::int64_t offset = 0;
  std::int64_t count = 0;
};

ManifestTensor parse_entry(const json& e) {
  if (!e.is_object() || !e.contains("name") || !e.contains("shape") || !e.contains("offset") ||
      !e.contains("count")) {
    throw DataError("malformed tensor entry in checkpoint manifest");
  }
  ManifestTensor t;
  t.name = e.at("name").get<std::string>();
  t.shape = e.at("shape").get<Shape>();
  t.offset = e.at("offset").get<std::int64_t>();
  t.count = e.at("count").get<std::int64_t>();
  if (t.count != shape_numel(t.shape)) {
    throw DataError("tensor '" + t.name + "' count disagrees with its shape");
  }
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& config, const Vocab& vocab,
                     Model& model, const AdaGrad* opt) {
  ParamRegistry reg = model.registry();

  json manifest;
  manifest["config"] = json::parse(config_to_json_text(config));
  json words = json::array();
  json counts = json::array();
  for (int i = 0; i < vocab.size(); ++i) {
    words.push_back(vocab.word(i));
    counts.push_back(vocab.count(i));
  }
  manifest["vocab"] = {{"words", std::move(words)}, {"counts", std::move(counts)}};

  json tensors = json::array();
  std::int64_t offset = 0;
  for (const ParamRef& p : reg) {
    tensors.push_back(tensor_entry(p.name, *p.tensor, offset));
    offset += p.tensor->numel();
  }
  if (opt != nullptr) {
    const ParamRegistry& oreg = opt->registry();
    const std::vector<Tensor>& accum = opt->accumulators();
    if (oreg.size() != reg.size()) {
      throw DataError("optimizer registry does not match the model");
    }
    for (std::size_t i = 0; i < oreg.size(); ++i) {
      tensors.push_back(tensor_entry(kOptPrefix + oreg[i].name, accum[i], offset));
      offset += accum[i].numel();
    }
  }
  manifest["tensors"] = std::move(tensors);

  std::string body = manifest.dump();
  std::string out;
  out.reserve(24 + body.size() + static_cast<std::size_t>(offset) * 8);
  out.append(kMagic, sizeof(kMagic));
  append_u32(out, kCheckpointVersion);
  append_u64(out, body.size());
  out += body;
  for (const ParamRef& p : reg) append_doubles(out, p.tensor->values());
  if (opt != nullptr) {
    for (const Tensor& t : opt->accumulators()) append_doubles(out, t.values());
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) throw DataError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  std::string bytes = buf.str();

  ByteReader reader(bytes, path);
  const char* magic = reader.take(sizeof(kMagic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path + " is not a checkpoint file");
  }
  std::uint32_t version = reader.u32();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint " + path + " has format version " + std::to_string(version) +
                    ", expected " + std::to_string(kCheckpointVersion));
  }
  std::uint64_t manifest_len = reader.u64();
  const char* manifest_bytes = reader.take(manifest_len);

  json manifest;
  try {
    manifest = json::parse(std::string_view(manifest_bytes, manifest_len));
  } catch (const json::parse_error& e) {
    throw DataError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }
  if (!manifest.is_object() || !manifest.contains("config") || !manifest.contains("vocab") ||
      !manifest.contains("tensors")) {
    throw DataError("checkpoint manifest is missing required sections");
  }

  RunConfig config = config_from_json_text(manifest.at("config").dump());

  const json& v = manifest.at("vocab");
  if (!v.is_object() || !v.contains("words") || !v.contains("counts")) {
    throw DataError("checkpoint manifest has a malformed vocab section");
  }
  auto vwords = v.at("words").get<std::vector<std::string>>();
  auto vcounts = v.at("counts").get<std::vector<std::int64_t>>();
  Vocab vocab = Vocab::from_entries(vwords, vcounts);

  Checkpoint ckpt{config, vocab, Model(model_config(config, vocab.size())), {}, false};
  ParamRegistry reg = ckpt.model.registry();
  std::unordered_map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < reg.size(); ++i) by_name.emplace(reg[i].name, i);

  std::vector<ManifestTensor> model_entries;
  std::vector<ManifestTensor> opt_entries;
  for (const json& e : manifest.at("tensors")) {
    ManifestTensor t = parse_entry(e);
    if (t.name.starts_with(kOptPrefix)) {
      opt_entries.push_back(std::move(t));
    } else {
      model_entries.push_back(std::move(t));
    }
  }

  std::vector<bool> filled(reg.size(), false);
  std::int64_t expected_offset = 0;
  auto read_into = [&](const ManifestTensor& t, Tensor& dst, const char* what) {
    if (t.shape != dst.shape()) {
      throw DataError(std::string(what) + " '" + t.name + "' has shape " + shape_str(t.shape) +
                      ", expected " + shape_str(dst.shape()));
    }
    if (t.offset != expected_offset) {
      throw DataError(std::string(what) + " '" + t.name + "' has a non-contiguous payload offset");
    }
    reader.doubles(dst.values());
    expected_offset += dst.numel();
  };

  for (const ManifestTensor& t : model_entries) {
    auto it = by_name.find(t.name);
    if (it == by_name.end()) {
      throw DataError("checkpoint tensor '" + t.name + "' does not exist in the model");
    }
    if (filled[it->second]) throw DataError("duplicate checkpoint tensor '" + t.name + "'");
    read_into(t, *reg[it->second].tensor, "checkpoint tensor");
    filled[it->second] = true;
  }
  for (std::size_t i = 0; i < reg.size(); ++i) {
    if (!filled[i]) throw DataError("checkpoint is missing tensor '" + reg[i].name + "'");
  }

  if (!opt_entries.empty()) {
    if (opt_entries.size() != reg.size()) {
      throw DataError("checkpoint optimizer state does not cover every parameter");
    }
    std::unordered_map<std::string, const ManifestTensor*> opt_by_name;
    for (const ManifestTensor& t : opt_entries) {
      if (!opt_by_name.emplace(t.name, &t).second) {
        throw DataError("duplicate checkpoint tensor '" + t.name + "'");
      }
    }
    ckpt.opt_accumulators.reserve(reg.size());
    for (const ParamRef& p : reg) {
      auto it = opt_by_name.find(kOptPrefix + p.name);
      if (it == opt_by_name.end()) {
        throw DataError("checkpoint is missing optimizer state for '" + p.name + "'");
      }
      Tensor accum(p.tensor->shape());
      read_into(*it->second, accum, "optimizer tensor");
      ckpt.opt_accumulators.push_back(std::move(accum));
    }
    ckpt.has_optimizer = true;
  }

  if (reader.remaining() != 0) {
    throw DataError("checkpoint " + path + " has trailing bytes after the payload");
  }
  return ckpt;
}

}  // namespace revnet
