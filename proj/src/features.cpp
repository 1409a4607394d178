#include "synthmix/features.hpp"

#include "synthmix/error.hpp"
#include "synthmix/hash.hpp"
#include "synthmix/text.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace synthmix {

namespace {

void check_range(const NgramRange& r, const char* what) {
    if (r.min == 0 && r.max == 0) return;
    if (r.min < 1 || r.max < r.min) throw ConfigError(std::string(what) + " n-gram range must satisfy 1 <= min <= max");
}

struct Accumulator {
    std::uint32_t mask;
    std::vector<std::pair<std::uint32_t, double>> entries;

    void add(char kind, std::string_view gram) {
        std::string key;
        key.reserve(gram.size() + 2);
        key.push_back(kind);
        key.push_back(':');
        key.append(gram);
        const std::uint32_t h = hash::murmur3_32(key, kFeatureHashSeed);
        // Low bits pick the bucket, the top bit picks the sign.
        entries.emplace_back(h & mask, (h >> 31) ? -1.0 : 1.0);
    }
};

} // namespace

void FeatureConfig::validate() const {
    check_range(word, "word");
    check_range(chars, "char");
    if (!word.enabled() && !chars.enabled()) throw ConfigError("enable word or char n-grams");
    if (dim < 2 || (dim & (dim - 1)) != 0 || dim > (1u << 30))
        throw ConfigError("hash dimension must be a power of two in [2, 2^30]");
}

double SparseVector::squared_norm() const {
    double s = 0.0;
    for (double v : value) s += v * v;
    return s;
}

double IdfTable::weight(std::uint32_t bucket) const {
    const double n = static_cast<double>(documents);
    const double d = bucket < df.size() ? static_cast<double>(df[bucket]) : 0.0;
    return std::log((1.0 + n) / (1.0 + d)) + 1.0;
}

SparseVector hashed_counts(const FeatureConfig& config, std::string_view raw) {
    const std::string folded = text::squeeze_space(text::fold_case(raw));
    Accumulator acc{config.dim - 1, {}};

    if (config.word.enabled()) {
        const auto toks = text::words(folded);
        for (int n = config.word.min; n <= config.word.max; ++n) {
            if (toks.size() < static_cast<size_t>(n)) break;
            for (size_t i = 0; i + static_cast<size_t>(n) <= toks.size(); ++i) {
                std::string gram = toks[i];
                for (int k = 1; k < n; ++k) {
                    gram.push_back(' ');
                    gram += toks[i + static_cast<size_t>(k)];
                }
                acc.add('w', gram);
            }
        }
    }
    if (config.chars.enabled()) {
        const auto cps = text::code_points(folded);
        for (int n = config.chars.min; n <= config.chars.max; ++n) {
            if (cps.size() < static_cast<size_t>(n)) break;
            for (size_t i = 0; i + static_cast<size_t>(n) <= cps.size(); ++i) {
                const char* begin = cps[i].data();
                const char* end = cps[i + static_cast<size_t>(n) - 1].data() + cps[i + static_cast<size_t>(n) - 1].size();
                acc.add('c', std::string_view(begin, static_cast<size_t>(end - begin)));
            }
        }
    }

    std::sort(acc.entries.begin(), acc.entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    SparseVector out;
    for (size_t i = 0; i < acc.entries.size();) {
        const auto bucket = acc.entries[i].first;
        double sum = 0.0;
        for (; i < acc.entries.size() && acc.entries[i].first == bucket; ++i) sum += acc.entries[i].second;
        if (sum != 0.0) {
            out.index.push_back(bucket);
            out.value.push_back(sum);
        }
    }
    return out;
}

SparseVector weight_counts(const FeatureConfig& config, const IdfTable* idf, SparseVector v) {
    for (size_t i = 0; i < v.nnz(); ++i) {
        const double c = v.value[i];
        const double mag = config.tf == TfWeighting::binary ? 1.0 : 1.0 + std::log(std::fabs(c));
        double w = std::copysign(mag, c);
        if (config.use_idf && idf && !idf->empty()) w *= idf->weight(v.index[i]);
        v.value[i] = w;
    }
    if (config.l2_normalize) {
        const double norm = std::sqrt(v.squared_norm());
        if (norm > 0.0)
            for (double& x : v.value) x /= norm;
    }
    return v;
}

SparseVector vectorize(const FeatureConfig& config, const IdfTable* idf, std::string_view text) {
    return weight_counts(config, idf, hashed_counts(config, text));
}

} // namespace synthmix
