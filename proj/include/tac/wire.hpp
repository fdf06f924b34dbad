#pragma once

// Binary record format, all fields little-endian:
//
//   offset size field
//        0    4 magic "DDC1"
//        4    1 version (1)
//        5    4 segment_id   u32
//        9    2 cg           u16
//       11    4 latent_len   u32
//       15    4 predicted_error f32
//       19  4*n latent       f32[latent_len]

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tac/core.hpp"

namespace tac::wire {

inline constexpr std::size_t kHeaderSize = 19;
inline constexpr std::uint8_t kVersion = 1;
inline constexpr char kMagic[4] = {'D', 'D', 'C', '1'};

struct WireError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadMagic : WireError {
  using WireError::WireError;
};
struct VersionMismatch : WireError {
  using WireError::WireError;
};
struct Truncated : WireError {
  using WireError::WireError;
};

std::vector<std::uint8_t> serialize(const CompressedRecord& r);
void append(std::vector<std::uint8_t>& out, const CompressedRecord& r);

/// Parses one record at the front of `bytes`; `consumed` receives its size.
CompressedRecord deserialize(std::span<const std::uint8_t> bytes, std::size_t* consumed);
/// `bytes` must hold exactly one record.
CompressedRecord deserialize(std::span<const std::uint8_t> bytes);

/// Concatenated records.
std::vector<CompressedRecord> deserialize_stream(std::span<const std::uint8_t> bytes);
void write_stream(const std::string& path, const std::vector<CompressedRecord>& records);
std::vector<CompressedRecord> read_stream(const std::string& path);

}  // namespace tac::wire
