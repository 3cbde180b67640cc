#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ssae/autodiff.hpp"

namespace ssae::ad {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Flat binary parameter checkpoint, little-endian throughout:
//   magic "SSAE", version u32, count u32, then per tensor:
//   name_len u32, name bytes, rank u32, extents u32 each, values f64.
// Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

// In-memory variants; the file format is the byte string.
std::vector<std::uint8_t> checkpoint_bytes(const NamedTensors& tensors);
NamedTensors checkpoint_from_bytes(const std::vector<std::uint8_t>& bytes);

}  // namespace ssae::ad
