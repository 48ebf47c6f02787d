#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mca/smallnet.hpp"

namespace mca {

// Checkpoint layout (all integers little-endian):
//   "MCAK" | u16 version | 6 x u32 NetConfig fields | u64 config digest |
//   u64 parameter count | parameter count x f32
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// FNV-1a over the little-endian NetConfig fields.
std::uint64_t config_digest(const NetConfig& config);

std::vector<std::uint8_t> encode_checkpoint(const SmallNet<float>& net);
SmallNet<float> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const SmallNet<float>& net, const std::filesystem::path& path);
SmallNet<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace mca
