#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "ulm/neural/model.hpp"

namespace ulm::nn {

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Little-endian: "ULMW", u16 version, model config, u32 tensor count, then
// per tensor u32 name length, name, u32 rank, u32 dims, f32 payload.
void write_checkpoint(std::ostream& os, const Network<float>& net);
Network<float> read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& path, const Network<float>& net);
Network<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace ulm::nn
