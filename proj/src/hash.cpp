#include "synthmix/hash.hpp"

#include <openssl/sha.h>

#include <array>
#include <cstring>

namespace synthmix::hash {

namespace {

std::array<unsigned char, SHA256_DIGEST_LENGTH> digest(std::string_view data) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
    SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), md.data());
    return md;
}

inline std::uint32_t rotl32(std::uint32_t x, int r) { return (x << r) | (x >> (32 - r)); }

} // namespace

std::string sha256_hex(std::string_view data) {
    static constexpr char kHex[] = "0123456789abcdef";
    auto md = digest(data);
    std::string out;
    out.reserve(md.size() * 2);
    for (unsigned char b : md) {
        out.push_back(kHex[b >> 4]);
        out.push_back(kHex[b & 0xF]);
    }
    return out;
}

std::uint64_t sha256_u64(std::string_view data) {
    auto md = digest(data);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | md[i];
    return v;
}

std::uint32_t murmur3_32(std::string_view key, std::uint32_t seed) {
    const auto* data = reinterpret_cast<const unsigned char*>(key.data());
    const auto len = key.size();
    const size_t nblocks = len / 4;
    std::uint32_t h1 = seed;
    constexpr std::uint32_t c1 = 0xcc9e2d51;
    constexpr std::uint32_t c2 = 0x1b873593;

    for (size_t i = 0; i < nblocks; ++i) {
        // Little-endian block read regardless of host order.
        std::uint32_t k1 = static_cast<std::uint32_t>(data[4 * i]) |
                           (static_cast<std::uint32_t>(data[4 * i + 1]) << 8) |
                           (static_cast<std::uint32_t>(data[4 * i + 2]) << 16) |
                           (static_cast<std::uint32_t>(data[4 * i + 3]) << 24);
        k1 *= c1;
        k1 = rotl32(k1, 15);
        k1 *= c2;
        h1 ^= k1;
        h1 = rotl32(h1, 13);
        h1 = h1 * 5 + 0xe6546b64;
    }

    const unsigned char* tail = data + nblocks * 4;
    std::uint32_t k1 = 0;
    switch (len & 3) {
    case 3: k1 ^= static_cast<std::uint32_t>(tail[2]) << 16; [[fallthrough]];
    case 2: k1 ^= static_cast<std::uint32_t>(tail[1]) << 8; [[fallthrough]];
    case 1:
        k1 ^= tail[0];
        k1 *= c1;
        k1 = rotl32(k1, 15);
        k1 *= c2;
        h1 ^= k1;
    }

    h1 ^= static_cast<std::uint32_t>(len);
    h1 ^= h1 >> 16;
    h1 *= 0x85ebca6b;
    h1 ^= h1 >> 13;
    h1 *= 0xc2b2ae35;
    h1 ^= h1 >> 16;
    return h1;
}

} // namespace synthmix::hash
