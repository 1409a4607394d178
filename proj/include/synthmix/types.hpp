#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace synthmix {

enum class Instruction { theory_driven, naive };
enum class Generation { new_text, alternation };

/// One cell of the instruction-strategy x generation-type grid.
struct StrategyCell {
    Instruction instruction = Instruction::theory_driven;
    Generation generation = Generation::new_text;

    friend bool operator==(const StrategyCell&, const StrategyCell&) = default;
    friend auto operator<=>(const StrategyCell&, const StrategyCell&) = default;

    /// "theory_driven/new", "naive/alternation", ...
    std::string key() const;
    /// Parses key(); throws ConfigError on anything else.
    static StrategyCell parse(std::string_view key);

    static constexpr std::array<StrategyCell, 4> all() {
        return {StrategyCell{Instruction::theory_driven, Generation::new_text},
                StrategyCell{Instruction::theory_driven, Generation::alternation},
                StrategyCell{Instruction::naive, Generation::new_text},
                StrategyCell{Instruction::naive, Generation::alternation}};
    }
};

std::string_view to_string(Instruction i);
std::string_view to_string(Generation g);
Instruction parse_instruction(std::string_view s);
Generation parse_generation(std::string_view s);

enum class Origin { labeled, synthetic };
std::string_view to_string(Origin o);
Origin parse_origin(std::string_view s);

struct Provenance {
    std::string strategy;          // StrategyCell::key()
    std::string generator_model;
    std::string prompt_fingerprint;
    std::string seed_example_id;   // empty for newly generated text

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Example {
    std::string id;
    std::string text;
    std::string label;
    Origin origin = Origin::labeled;
    std::optional<Provenance> provenance;

    friend bool operator==(const Example&, const Example&) = default;
};

} // namespace synthmix
