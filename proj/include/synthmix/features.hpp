#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synthmix {

struct NgramRange {
    int min = 0;
    int max = 0;
    bool enabled() const noexcept { return min > 0; }
    friend bool operator==(const NgramRange&, const NgramRange&) = default;
};

enum class TfWeighting { binary, sublinear };

struct FeatureConfig {
    NgramRange word{1, 2};
    NgramRange chars{3, 5};
    std::uint32_t dim = 1u << 18;
    TfWeighting tf = TfWeighting::sublinear;
    bool use_idf = true;
    bool l2_normalize = true;

    void validate() const;
    friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// Sorted by index; no explicit zeros.
struct SparseVector {
    std::vector<std::uint32_t> index;
    std::vector<double> value;

    std::size_t nnz() const noexcept { return index.size(); }
    double squared_norm() const;
    friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

/// Smoothed idf over hashed buckets: ln((1 + N) / (1 + df)) + 1.
struct IdfTable {
    std::uint64_t documents = 0;
    std::vector<std::uint32_t> df; // length dim

    double weight(std::uint32_t bucket) const;
    bool empty() const noexcept { return df.empty(); }
    friend bool operator==(const IdfTable&, const IdfTable&) = default;
};

/// Seed for feature hashing. Changing it invalidates every saved model.
inline constexpr std::uint32_t kFeatureHashSeed = 0x5eed1d5u;

/// Signed hashed counts before tf/idf/normalisation. Bucket values may be
/// negative; colliding features with opposite signs cancel.
SparseVector hashed_counts(const FeatureConfig& config, std::string_view text);

/// Full pipeline: hashed counts -> tf weighting -> idf (when given) -> L2.
SparseVector vectorize(const FeatureConfig& config, const IdfTable* idf, std::string_view text);

/// Applies tf, idf and normalisation to hashed counts.
SparseVector weight_counts(const FeatureConfig& config, const IdfTable* idf, SparseVector counts);

} // namespace synthmix
