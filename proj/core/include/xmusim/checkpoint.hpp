#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "xmusim/contrastive.hpp"

namespace xmusim {

/// Projection head checkpoint layout ("XMPH"):
///
///   "XMPH" | u32 version (=1) | u32 input | u32 hidden | u32 latent | W1 | b1 | W2 | b2
///
/// Parameters are float64 little-endian, matrices row-major. Round trips are bit-exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_head(const ProjectionHead& head);
ProjectionHead decode_head(const std::vector<std::uint8_t>& bytes);

void write_head(const ProjectionHead& head, const std::filesystem::path& path);
ProjectionHead read_head(const std::filesystem::path& path);

}  // namespace xmusim
