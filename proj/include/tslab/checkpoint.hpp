#pragma once

#include <cstdint>
#include <filesystem>

#include "tslab/transformer.hpp"

namespace tslab {

// Named-tensor checkpoint, all integers little-endian:
//
//   "TSTL" | u32 version (= 1) | u32 tensor count
//   per tensor: u16 name length | UTF-8 name | u8 ndim | u64 dims[ndim] | f32 payload
//
// Tensors are written in map (name) order.
inline constexpr char kCheckpointMagic[4] = {'T', 'S', 'T', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
// u16 name length + u8 ndim.
inline constexpr std::size_t kCheckpointEntryOverhead = 3;
inline constexpr std::size_t kCheckpointHeaderBytes = 12;

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);

// Loaded tensors have requires_grad set so they can be trained further.
ModelParams load_checkpoint(const std::filesystem::path& path);

// Size in bytes save_checkpoint will produce.
std::uintmax_t checkpoint_size(const ModelParams& params);

}  // namespace tslab
