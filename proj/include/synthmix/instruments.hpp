#pragma once

#include "synthmix/rng.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace synthmix {

enum class InstrumentType { survey_scale, codebook };

struct InstrumentItem {
    std::string text;
    std::optional<std::string> description;

    friend bool operator==(const InstrumentItem&, const InstrumentItem&) = default;
};

struct Dimension {
    std::string name;
    std::string target_class;
    std::optional<std::string> description;
    std::vector<InstrumentItem> items;

    friend bool operator==(const Dimension&, const Dimension&) = default;
};

/// A survey scale or annotation codebook describing how a construct shows up
/// in text. Immutable once loaded.
struct Instrument {
    std::string construct;
    InstrumentType instrument_type = InstrumentType::survey_scale;
    std::string text_genre;
    std::vector<std::string> classes;
    std::vector<Dimension> dimensions;

    friend bool operator==(const Instrument&, const Instrument&) = default;

    bool has_class(std::string_view label) const;
    /// True when at least one dimension targets the label.
    bool targets(std::string_view label) const;
    /// Classes that some dimension targets, in class order.
    std::vector<std::string> targeted_classes() const;
};

/// Throws InvariantError naming the first violated rule.
void validate(const Instrument& instrument);

Instrument parse_instrument(std::string_view json_text);
Instrument load_instrument(const std::filesystem::path& path);
std::string serialize_instrument(const Instrument& instrument);

struct SampledItem {
    const Dimension* dimension;
    const InstrumentItem* item;
};

/// Uniform draw over all items of all dimensions targeting the class.
SampledItem sample_item(const Instrument& instrument, std::string_view target_class, Rng& rng);

} // namespace synthmix
