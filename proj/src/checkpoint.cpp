#include "zerosweep/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "zerosweep/errors.h"

namespace zs {
namespace {

constexpr char kMagic[4] = {'Z', 'S', 'C', 'K'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Code::kTruncated,
                            std::string("checkpoint truncated while reading ") + what);
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const NetworkWeights& weights,
                                          const CheckpointMetadata& metadata) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(weights.spec().kind()));
  put_u32(out, static_cast<std::uint32_t>(weights.spec().board_size()));
  put_u32(out, static_cast<std::uint32_t>(weights.arch().channels));
  put_u32(out, static_cast<std::uint32_t>(weights.arch().fc1));
  put_u32(out, static_cast<std::uint32_t>(weights.arch().fc2));

  nlohmann::json meta = {{"iteration", metadata.iteration},
                         {"loss_target", metadata.loss_target},
                         {"hyperparams", metadata.hyperparams}};
  const std::string meta_text = meta.dump();
  put_u32(out, static_cast<std::uint32_t>(meta_text.size()));
  out.insert(out.end(), meta_text.begin(), meta_text.end());

  const auto& arrays = weights.arrays();
  put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out.insert(out.end(), a.name.begin(), a.name.end());
    put_u32(out, static_cast<std::uint32_t>(a.shape.size()));
    for (int d : a.shape) put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const auto& a : arrays) {
    for (double v : a.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

LoadedCheckpoint load_checkpoint(const std::vector<std::uint8_t>& bytes,
                                 const std::optional<GameSpec>& expected) {
  using Code = CheckpointError::Code;
  Reader r(bytes);
  if (r.str(4, "magic") != std::string(kMagic, 4)) {
    throw CheckpointError(Code::kBadMagic, "not a checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(Code::kVersionMismatch,
                          "checkpoint format version " + std::to_string(version) +
                              ", this build reads " + std::to_string(kCheckpointVersion));
  }
  const std::uint32_t kind = r.u32("game kind");
  const std::uint32_t size = r.u32("board size");
  if (kind > 2 || (size != 5 && size != 6)) {
    throw CheckpointError(Code::kCorrupt, "checkpoint has an invalid game kind or size");
  }
  const GameSpec spec(static_cast<GameKind>(kind), static_cast<int>(size));
  if (expected && !(*expected == spec)) {
    throw CheckpointError(Code::kShapeMismatch, "checkpoint is for " + spec_name(spec) +
                                                    ", expected " + spec_name(*expected));
  }
  ArchConfig arch;
  arch.channels = static_cast<int>(r.u32("channels"));
  arch.fc1 = static_cast<int>(r.u32("fc1"));
  arch.fc2 = static_cast<int>(r.u32("fc2"));
  if (arch.channels < 1 || arch.fc1 < 1 || arch.fc2 < 1 || arch.channels > 4096 ||
      arch.fc1 > 1 << 16 || arch.fc2 > 1 << 16) {
    throw CheckpointError(Code::kCorrupt, "checkpoint has an invalid architecture");
  }

  const std::uint32_t meta_len = r.u32("metadata length");
  const std::string meta_text = r.str(meta_len, "metadata");
  CheckpointMetadata metadata;
  try {
    const auto meta = nlohmann::json::parse(meta_text);
    metadata.iteration = meta.at("iteration").get<int>();
    metadata.loss_target = meta.at("loss_target").get<std::string>();
    metadata.hyperparams = meta.at("hyperparams");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(Code::kCorrupt, std::string("bad checkpoint metadata: ") + e.what());
  }

  NetworkWeights weights = NetworkWeights::zeros(spec, arch);
  auto& arrays = weights.arrays();
  const std::uint32_t count = r.u32("array count");
  if (count != arrays.size()) {
    throw CheckpointError(Code::kShapeMismatch, "checkpoint has " + std::to_string(count) +
                                                    " arrays, architecture needs " +
                                                    std::to_string(arrays.size()));
  }
  for (auto& a : arrays) {
    const std::uint32_t name_len = r.u32("array name length");
    const std::string name = r.str(name_len, "array name");
    const std::uint32_t ndim = r.u32("array rank");
    std::vector<int> shape;
    for (std::uint32_t i = 0; i < ndim && i < 8; ++i) shape.push_back(static_cast<int>(r.u32("array dim")));
    if (name != a.name || shape != a.shape) {
      throw CheckpointError(Code::kShapeMismatch,
                            "array '" + name + "' does not match expected '" + a.name + "'");
    }
  }
  for (auto& a : arrays) {
    for (auto& v : a.values) v = static_cast<double>(r.f32("array data"));
  }
  if (r.remaining() != 0) {
    throw CheckpointError(Code::kCorrupt, "trailing bytes after checkpoint data");
  }
  return {std::move(weights), std::move(metadata)};
}

void save_checkpoint_file(const std::filesystem::path& path, const NetworkWeights& weights,
                          const CheckpointMetadata& metadata) {
  const auto bytes = save_checkpoint(weights, metadata);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError(CheckpointError::Code::kIo, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint_file(const std::filesystem::path& path,
                                      const std::optional<GameSpec>& expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointError::Code::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return load_checkpoint(bytes, expected);
}

}  // namespace zs
