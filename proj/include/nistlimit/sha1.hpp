#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace nistlimit::sha1 {

using State = std::array<std::uint32_t, 5>;
using Digest = std::array<std::uint8_t, 20>;

inline constexpr State kInitialState = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};

/// One application of the SHA-1 compression function to a 64-byte block.
void compress(State& state, std::span<const std::uint8_t, 64> block);

/// Full SHA-1 (with FIPS 180 padding).
Digest hash(std::span<const std::uint8_t> message);

}  // namespace nistlimit::sha1
