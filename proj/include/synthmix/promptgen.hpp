#pragma once

#include "synthmix/instruments.hpp"
#include "synthmix/rng.hpp"
#include "synthmix/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace synthmix {

struct ChatPrompt {
    std::string system_message;
    std::string user_message;
    int expected_count = 5;

    friend bool operator==(const ChatPrompt&, const ChatPrompt&) = default;
};

struct SeedExample {
    std::string id;
    std::string text;
};

struct GenerationBatch {
    ChatPrompt prompt;
    std::string target_class;
    StrategyCell strategy;
    /// (dimension name, item text) for theory-driven prompts.
    std::optional<std::pair<std::string, std::string>> instrument_item;
    std::vector<SeedExample> seed_examples;
};

struct MessageTemplate {
    std::string system;
    std::string user;
};

/// Generation prompts for one text genre, one template per strategy cell.
///
/// Recognised placeholders: [count], [topic] / [class] (the target label),
/// [Random Survey Item], [subtopic], [topic description], [Example sentence],
/// and any token of the form [List of N randomly selected ...].
struct TemplateSet {
    std::string genre;
    int seed_examples = 1;
    std::map<std::string, MessageTemplate> cells; // keyed by StrategyCell::key()

    const MessageTemplate& for_cell(const StrategyCell& cell) const;
};

TemplateSet parse_template_set(std::string_view json_text);
TemplateSet load_template_set(const std::filesystem::path& path);

/// Template sets keyed by genre, loaded from every *.json in a directory.
class TemplateLibrary {
public:
    static TemplateLibrary load_directory(const std::filesystem::path& dir);
    void add(TemplateSet set);
    const TemplateSet& for_genre(std::string_view genre) const;

private:
    std::map<std::string, TemplateSet, std::less<>> sets_;
};

/// Builds the chat prompt for one generation call. For theory-driven cells the
/// instrument item is drawn with `rng`; seed examples are supplied by the caller.
GenerationBatch build_generation_prompt(const StrategyCell& cell, const TemplateSet& templates,
                                        const Instrument& instrument, std::string_view target_class,
                                        const std::vector<SeedExample>& seed_examples, int batch_size,
                                        Rng& rng);

struct ParsedGeneration {
    std::vector<Example> examples;
    std::vector<std::string> warnings;
};

/// Two-stage parse: strict JSON array first (strings or objects with a
/// "text" field, optionally nested under a key), then quoted-string / list-line
/// extraction. Throws GenerationParseError when nothing usable is found.
ParsedGeneration parse_generation_response(std::string_view raw, int expected_count,
                                           std::string_view target_class);

/// Canonical wire format for generated texts: a JSON array of strings.
std::string serialize_generation(const std::vector<Example>& examples);

ChatPrompt build_classification_prompt(const std::vector<std::string>& labels, std::string_view sentence);

/// Label named after the first "Category:" marker. Throws ClassificationParseError.
std::string parse_classification_response(std::string_view raw, const std::vector<std::string>& labels);

/// Placeholder tokens that must never survive rendering.
bool has_unresolved_placeholder(std::string_view message);

} // namespace synthmix
