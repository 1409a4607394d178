#include "synthmix/types.hpp"

#include "synthmix/error.hpp"

#include <string>

namespace synthmix {

std::string_view to_string(Instruction i) {
    return i == Instruction::theory_driven ? "theory_driven" : "naive";
}

std::string_view to_string(Generation g) {
    return g == Generation::new_text ? "new" : "alternation";
}

Instruction parse_instruction(std::string_view s) {
    if (s == "theory_driven" || s == "theory" || s == "T") return Instruction::theory_driven;
    if (s == "naive" || s == "N") return Instruction::naive;
    throw ConfigError("unknown instruction strategy '" + std::string(s) + "'");
}

Generation parse_generation(std::string_view s) {
    if (s == "new" || s == "N") return Generation::new_text;
    if (s == "alternation" || s == "alternations" || s == "A") return Generation::alternation;
    throw ConfigError("unknown generation type '" + std::string(s) + "'");
}

std::string StrategyCell::key() const {
    std::string out(to_string(instruction));
    out.push_back('/');
    out.append(to_string(generation));
    return out;
}

StrategyCell StrategyCell::parse(std::string_view key) {
    auto slash = key.find('/');
    if (slash == std::string_view::npos)
        throw ConfigError("strategy cell must look like 'theory_driven/new', got '" + std::string(key) + "'");
    return {parse_instruction(key.substr(0, slash)), parse_generation(key.substr(slash + 1))};
}

std::string_view to_string(Origin o) {
    return o == Origin::labeled ? "labeled" : "synthetic";
}

Origin parse_origin(std::string_view s) {
    if (s == "labeled") return Origin::labeled;
    if (s == "synthetic") return Origin::synthetic;
    throw SchemaError("origin must be 'labeled' or 'synthetic', got '" + std::string(s) + "'");
}

} // namespace synthmix
