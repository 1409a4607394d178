#pragma once

#include "synthmix/rng.hpp"
#include "synthmix/types.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace synthmix {

struct Corpus {
    std::string study;
    std::vector<std::string> classes;
    std::vector<Example> examples;

    /// Unique ids, labels within classes, non-blank texts, provenance on synthetic rows.
    void validate() const;
    std::map<std::string, std::size_t> count_by_class(std::optional<Origin> origin = std::nullopt) const;
    std::size_t size() const noexcept { return examples.size(); }
    std::vector<std::string> ids() const;
};

enum class FileFormat { automatic, jsonl, csv };

struct LoadOptions {
    std::string study;
    FileFormat format = FileFormat::automatic;
    std::string text_field = "text";
    std::string label_field = "label";
    /// Used when present in a row; otherwise ids are "r<row>-<hash8>".
    std::string id_field = "id";
    /// Allowed labels in order. Empty: labels in order of first appearance.
    std::vector<std::string> classes;
    /// Raw label (after trimming) -> class label.
    std::map<std::string, std::string> aliases;
};

/// Reads labeled rows (JSONL or CSV). Every example gets origin=labeled.
Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& options);

std::map<std::string, std::string> load_alias_map(const std::filesystem::path& path);

/// Interchange JSONL: {"id","text","label","origin","provenance"} per line.
std::string to_jsonl(const std::vector<Example>& examples);
std::vector<Example> parse_jsonl_examples(std::string_view data);
void write_examples(const std::filesystem::path& path, const std::vector<Example>& examples);
std::vector<Example> read_examples(const std::filesystem::path& path);

/// floor(x + 1/2), tolerant of binary representation error near halves.
std::size_t round_half_up(double x);

/// Exactly per_class_n examples of every class, drawn without replacement.
/// Input order is kept among the survivors.
Corpus balance(const Corpus& corpus, std::size_t per_class_n, Rng& rng);

/// Stratified split. Per class, round_half_up(fraction * size) go to the
/// first corpus (validation) and the rest to the second (held-out).
std::pair<Corpus, Corpus> split_validation(const Corpus& corpus, double fraction, Rng& rng);

enum class MixScope { per_class, global };
std::string_view to_string(MixScope s);
MixScope parse_mix_scope(std::string_view s);

struct ClassMix {
    std::string label;
    std::size_t total = 0;
    std::size_t synthetic = 0;
    std::size_t labeled = 0;
    bool has_supply = false;
};

struct MixPlan {
    double ratio = 0.0;
    std::size_t per_class_total = 0;
    MixScope scope = MixScope::per_class;
    std::vector<ClassMix> classes;
    /// Some class had no synthetic supply while the ratio asked for synthetic data.
    bool asymmetric = false;
    std::vector<std::string> notes;

    const ClassMix& for_class(std::string_view label) const;
};

MixPlan plan_mix(const Corpus& labeled_pool, const Corpus& synthetic_pool, std::size_t per_class_n, double ratio,
                 MixScope scope = MixScope::per_class);

/// Samples each class's labeled and synthetic shares without replacement and
/// shuffles the result. Labeled and synthetic draws use independent child
/// streams of `rng`, so the labeled part matches labeled_portion() exactly.
Corpus materialize_mix(const MixPlan& plan, const Corpus& labeled_pool, const Corpus& synthetic_pool, const Rng& rng);

/// The labeled rows materialize_mix would pick for this plan and stream.
Corpus labeled_portion(const MixPlan& plan, const Corpus& labeled_pool, const Rng& rng);

/// Drops every synthetic example.
Corpus without_synthetic(const Corpus& mixed);

} // namespace synthmix
