#pragma once

#include "synthmix/corpus.hpp"
#include "synthmix/instruments.hpp"
#include "synthmix/rng.hpp"

#include <string>

namespace synthmix {

/// Labeled stand-in data built from an instrument's mock vocabulary: each text
/// mixes words of its class with class-neutral filler.
struct ToyWorldOptions {
    std::size_t per_class = 100;
    int keywords_per_text = 2;
    /// Use only the first k words of each class list. 0: all of them.
    std::size_t max_keywords_per_class = 0;
    int filler_per_text = 6;
    /// Chance of one extra keyword from a different class.
    double distractor_rate = 0.0;
    /// Chance that the gold label is replaced by a uniformly drawn other class.
    double label_noise = 0.0;
    std::string id_prefix = "toy";
};

Corpus toy_corpus(const Instrument& instrument, const ToyWorldOptions& options, Rng& rng);

} // namespace synthmix
