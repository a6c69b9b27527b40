#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "mapnet/adam.hpp"
#include "mapnet/model.hpp"

namespace mapnet {

// Named array as stored on disk. Dims are the trimmed shape (trailing unit
// extents dropped, at least one dim kept).
struct CheckpointEntry {
  enum class DType : std::uint32_t { f32 = 1, f64 = 2, u64 = 3 };
  using Data = std::variant<std::vector<float>, std::vector<double>, std::vector<std::uint64_t>>;

  std::vector<std::uint32_t> dims;
  Data data;

  [[nodiscard]] DType dtype() const;
  [[nodiscard]] std::size_t count() const;
  friend bool operator==(const CheckpointEntry&, const CheckpointEntry&) = default;
};

// Binary layout, all integers 32-bit little-endian:
//   "MAPN" version n_paths n_blocks base_channels variant input_h input_w
//   precision entry_count { key_len key dtype rank dims... payload }*
// Entries are written in key order; payloads are raw little-endian elements.
struct Checkpoint {
  static constexpr std::uint32_t current_version = 1;

  ModelConfig config;
  std::map<std::string, CheckpointEntry> entries;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
// Throws FormatError (magic), VersionError, CorruptionError (length or
// malformed entry); nothing is returned on failure.
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Keys: param/<key>, buffer/<key>, adam/m/<key>, adam/v/<key>,
// state/timestep, state/rng, state/adam (lr, beta1, beta2, eps).
template <typename T>
Checkpoint make_checkpoint(const Model<T>& model, const AdamState<T>& adam, std::uint64_t rng_state);

// Copies parameters and buffers into model (configs must match) and
// returns the optimizer state; rng_state receives the stored PRNG state.
template <typename T>
AdamState<T> restore(const Checkpoint& ckpt, Model<T>& model, std::uint64_t* rng_state = nullptr);

}  // namespace mapnet
