#include "synthmix/toyworld.hpp"

#include "synthmix/error.hpp"
#include "synthmix/mock_backend.hpp"
#include "synthmix/text.hpp"

#include <fmt/format.h>

namespace synthmix {

Corpus toy_corpus(const Instrument& instrument, const ToyWorldOptions& options, Rng& rng) {
    if (options.keywords_per_text < 1) throw ConfigError("keywords_per_text must be >= 1");
    if (options.filler_per_text < 0) throw ConfigError("filler_per_text must be >= 0");
    const Vocabulary vocab = derive_vocabulary(instrument);
    const auto& filler = filler_words();
    const auto& classes = instrument.classes;

    Corpus c;
    c.study = "toy";
    c.classes = classes;
    for (std::size_t k = 0; k < classes.size(); ++k) {
        auto words = vocab.all_for(classes[k]);
        if (options.max_keywords_per_class > 0 && words.size() > options.max_keywords_per_class)
            words.resize(options.max_keywords_per_class);
        for (std::size_t i = 0; i < options.per_class; ++i) {
            std::vector<std::string> toks;
            for (int w = 0; w < options.keywords_per_text; ++w) toks.push_back(words[rng.uniform_index(words.size())]);
            for (int w = 0; w < options.filler_per_text; ++w) toks.push_back(filler[rng.uniform_index(filler.size())]);
            if (classes.size() > 1 && rng.bernoulli(options.distractor_rate)) {
                auto other = rng.uniform_index(classes.size() - 1);
                if (other >= k) ++other;
                const auto ow = vocab.all_for(classes[other]);
                toks.push_back(ow[rng.uniform_index(ow.size())]);
            }
            rng.shuffle(toks);
            std::string label = classes[k];
            if (classes.size() > 1 && rng.bernoulli(options.label_noise)) {
                auto other = rng.uniform_index(classes.size() - 1);
                if (other >= k) ++other;
                label = classes[other];
            }
            c.examples.push_back({fmt::format("{}-{}-{}", options.id_prefix, k, i), text::join(toks, " "), label,
                                  Origin::labeled, std::nullopt});
        }
    }
    return c;
}

} // namespace synthmix
