#include "synthmix/rng.hpp"

#include "synthmix/hash.hpp"

#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace synthmix {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    // Rejection sampling over the largest multiple of n.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

Rng Rng::fork(std::string_view tag) const {
    return Rng(derive_seed(seed_, tag));
}

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
    if (k > n) throw std::invalid_argument("sample_indices: k exceeds n");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + uniform_index(n - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view coordinates) {
    std::string key = std::to_string(master);
    key.push_back('|');
    key.append(coordinates);
    return hash::sha256_u64(key);
}

} // namespace synthmix
