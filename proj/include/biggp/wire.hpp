#pragma once

/** @file
 *
 * Frame format of the socket backend. Every frame is
 *
 *     u8  version (= kWireVersion)
 *     u64 body length in bytes
 *     u32 src, u32 dst
 *     u32 name length, name bytes, u32 phase, u32 block row, u32 block col
 *     u64 payload count, payload as f64
 *
 * with all integers and floats little-endian.
 */

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "biggp/message.hpp"

namespace biggp::wire {

inline constexpr std::uint8_t kWireVersion = 1;
inline constexpr std::size_t kHeaderBytes = 9;

std::vector<std::uint8_t> encode(const Message& m);

/// Body length announced by a 9-byte frame header. Throws on a version mismatch.
std::uint64_t body_length(std::span<const std::uint8_t> header);

Message decode_body(std::span<const std::uint8_t> body);

}  // namespace biggp::wire
