#include <doctest.h>

#include "synthmix/error.hpp"
#include "synthmix/instruments.hpp"

#include "helpers.hpp"

#include <map>
#include <set>

using namespace synthmix;
using testsupport::sexism_instrument;
using testsupport::topics_instrument;

TEST_CASE("bundled sexism scale") {
    const auto inst = load_instrument(sexism_instrument());
    CHECK(inst.instrument_type == InstrumentType::survey_scale);
    CHECK(inst.text_genre == "tweet");
    CHECK(inst.classes == std::vector<std::string>{"sexist", "non-sexist"});
    REQUIRE(inst.dimensions.size() == 4);
    CHECK(inst.dimensions.front().name == "Behavioral Expectations");
    CHECK(inst.dimensions.back().name == "Denying Inequality and Rejecting Feminism");
    for (const auto& d : inst.dimensions) CHECK(d.target_class == "sexist");
    CHECK(inst.targeted_classes() == std::vector<std::string>{"sexist"});
    CHECK_FALSE(inst.targets("non-sexist"));
}

TEST_CASE("bundled topics codebook") {
    const auto inst = load_instrument(topics_instrument());
    CHECK(inst.instrument_type == InstrumentType::codebook);
    CHECK(inst.classes == std::vector<std::string>{"External Relations", "Freedom and Democracy", "Political System",
                                                   "Economy", "Welfare and Quality of Life", "Fabric of Society",
                                                   "Social Groups"});
    CHECK(inst.dimensions.size() == 7);
    CHECK(inst.targeted_classes() == inst.classes);
    bool morality = false;
    for (const auto& d : inst.dimensions)
        for (const auto& it : d.items) {
            CHECK(it.description.has_value());
            morality = morality || it.text == "support of traditional morality";
        }
    CHECK(morality);
}

TEST_CASE("schema and invariant errors") {
    CHECK_THROWS_WITH_AS(parse_instrument(R"({"construct":"x","instrument_type":"survey_scale","text_genre":"t",
        "classes":[],"dimensions":[]})"),
                         doctest::Contains("classes must be non-empty"), SchemaError);
    CHECK_THROWS_AS(parse_instrument("{"), SchemaError);
    CHECK_THROWS_AS(parse_instrument(R"({"construct":"x","instrument_type":"survey_scale","text_genre":"t",
        "classes":["a"],"dimensions":[{"name":"d","target_class":"b","items":[{"text":"i"}]}]})"),
                    InvariantError);
    // codebook items need a description
    CHECK_THROWS_AS(parse_instrument(R"({"construct":"x","instrument_type":"codebook","text_genre":"t",
        "classes":["a"],"dimensions":[{"name":"d","target_class":"a","items":[{"text":"i"}]}]})"),
                    InvariantError);
    CHECK_THROWS_AS(parse_instrument(R"({"construct":"x","instrument_type":"survey_scale","text_genre":"t",
        "classes":["a","a"],"dimensions":[{"name":"d","target_class":"a","items":[{"text":"i"}]}]})"),
                    InvariantError);
    CHECK_THROWS_AS(parse_instrument(R"({"construct":"x","instrument_type":"survey_scale","text_genre":"t",
        "classes":["a"],"dimensions":[{"name":"d","target_class":"a","items":[]}]})"),
                    InvariantError);
    CHECK_THROWS_AS(load_instrument("/nonexistent/instrument.json"), IoError);
}

TEST_CASE("load, serialize, load round trip") {
    for (const auto& p : {sexism_instrument(), topics_instrument()}) {
        const auto a = load_instrument(p);
        CHECK(parse_instrument(serialize_instrument(a)) == a);
    }
}

TEST_CASE("text is NFC-normalised on load") {
    const auto inst = parse_instrument(R"({"construct":"x","instrument_type":"survey_scale","text_genre":"t",
        "classes":["café"],"dimensions":[{"name":"d","target_class":"café","items":[{"text":"i"}]}]})");
    CHECK(inst.classes.front() == "caf\xC3\xA9");
}

TEST_CASE("sample_item: single choice, determinism, missing class") {
    const auto single = load_instrument(testsupport::fixtures() / "instruments" / "sexism_single.json");
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng(s);
        CHECK(sample_item(single, "sexist", rng).item->text == "Men make better engineers than women");
    }
    const auto inst = load_instrument(sexism_instrument());
    Rng a(42), b(42);
    CHECK(sample_item(inst, "sexist", a).item == sample_item(inst, "sexist", b).item);
    Rng c(1);
    CHECK_THROWS_AS(sample_item(inst, "non-sexist", c), PreconditionError);
}

TEST_CASE("sample_item is uniform over the four scale items") {
    const auto inst = load_instrument(sexism_instrument());
    Rng rng(2024);
    std::map<std::string, int> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) ++counts[sample_item(inst, "sexist", rng).item->text];
    REQUIRE(counts.size() == 4);
    for (const auto& [text, n] : counts) {
        const double pct = 100.0 * n / draws;
        CHECK(std::abs(pct - 25.0) <= 0.6);
    }
}

TEST_CASE("sample_item covers every item within 50 draws per item") {
    const auto inst = load_instrument(topics_instrument());
    for (const auto& label : inst.classes) {
        std::set<std::string> all;
        for (const auto& d : inst.dimensions)
            if (d.target_class == label)
                for (const auto& it : d.items) all.insert(it.text);
        Rng rng(derive_seed(5, label));
        std::set<std::string> seen;
        for (size_t i = 0; i < 50 * all.size(); ++i) seen.insert(sample_item(inst, label, rng).item->text);
        CHECK(seen == all);
    }
}
