#pragma once

// Checkpoint byte layout (all integers little-endian u32 unless noted):
//
//   magic            4 bytes  "ZSCK"
//   version          u32      kCheckpointVersion
//   game kind        u32      0 othello, 1 connect4, 2 gobang
//   board size       u32
//   channels, fc1, fc2  u32 x3
//   metadata length  u32, then that many bytes of UTF-8 JSON
//   array count      u32
//   per array:       u32 name length, name bytes, u32 ndim, u32 dims[ndim]
//   data:            for each array in manifest order, numel float32 values
//                    (IEEE-754 binary32, little-endian)

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "zerosweep/net.h"

namespace zs {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMetadata {
  int iteration = 0;
  std::string loss_target;
  nlohmann::json hyperparams = nlohmann::json::object();

  bool operator==(const CheckpointMetadata&) const = default;
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Code { kBadMagic, kVersionMismatch, kTruncated, kShapeMismatch, kCorrupt, kIo };
  CheckpointError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

std::vector<std::uint8_t> save_checkpoint(const NetworkWeights& weights,
                                          const CheckpointMetadata& metadata);

struct LoadedCheckpoint {
  NetworkWeights weights;
  CheckpointMetadata metadata;
};

// When `expected` is given, a checkpoint for another game or board size is
// rejected with kShapeMismatch.
LoadedCheckpoint load_checkpoint(const std::vector<std::uint8_t>& bytes,
                                 const std::optional<GameSpec>& expected = std::nullopt);

// File variants. Saving writes to a temporary name and renames it into place.
void save_checkpoint_file(const std::filesystem::path& path, const NetworkWeights& weights,
                          const CheckpointMetadata& metadata);
LoadedCheckpoint load_checkpoint_file(const std::filesystem::path& path,
                                      const std::optional<GameSpec>& expected = std::nullopt);

}  // namespace zs
