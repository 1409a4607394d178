#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace synthmix::hash {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// First eight bytes of the SHA-256 digest, big-endian.
std::uint64_t sha256_u64(std::string_view data);

/// MurmurHash3 x86_32. Fixed across platforms; used for feature hashing.
std::uint32_t murmur3_32(std::string_view key, std::uint32_t seed);

} // namespace synthmix::hash
