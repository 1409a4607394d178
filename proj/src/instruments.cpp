#include "synthmix/instruments.hpp"

#include "synthmix/error.hpp"
#include "synthmix/json_io.hpp"
#include "synthmix/text.hpp"

#include <nlohmann/json.hpp>

#include <set>

namespace synthmix {

using nlohmann::json;

namespace {

std::string_view type_name(InstrumentType t) {
    return t == InstrumentType::survey_scale ? "survey_scale" : "codebook";
}

InstrumentType parse_type(const std::string& s) {
    if (s == "survey_scale") return InstrumentType::survey_scale;
    if (s == "codebook") return InstrumentType::codebook;
    throw SchemaError("instrument_type must be 'survey_scale' or 'codebook', got '" + s + "'");
}

std::optional<std::string> optional_text(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw SchemaError(where + "." + key + " must be a string");
    return text::nfc(it->get<std::string>());
}

} // namespace

bool Instrument::has_class(std::string_view label) const {
    for (const auto& c : classes)
        if (c == label) return true;
    return false;
}

bool Instrument::targets(std::string_view label) const {
    for (const auto& d : dimensions)
        if (d.target_class == label) return true;
    return false;
}

std::vector<std::string> Instrument::targeted_classes() const {
    std::vector<std::string> out;
    for (const auto& c : classes)
        if (targets(c)) out.push_back(c);
    return out;
}

void validate(const Instrument& ins) {
    if (text::is_blank(ins.construct)) throw InvariantError("construct must be non-blank");
    if (text::is_blank(ins.text_genre)) throw InvariantError("text_genre must be non-blank");
    if (ins.classes.empty()) throw InvariantError("classes must be non-empty");
    std::set<std::string> seen;
    for (const auto& c : ins.classes) {
        if (text::is_blank(c)) throw InvariantError("classes must not contain blank labels");
        if (!seen.insert(c).second) throw InvariantError("classes must be unique; '" + c + "' repeats");
    }
    if (ins.dimensions.empty()) throw InvariantError("instrument needs at least one dimension");
    std::set<std::string> names;
    for (const auto& d : ins.dimensions) {
        if (text::is_blank(d.name)) throw InvariantError("dimension name must be non-blank");
        if (!names.insert(d.name).second)
            throw InvariantError("dimension names must be unique; '" + d.name + "' repeats");
        if (!ins.has_class(d.target_class))
            throw InvariantError("dimension '" + d.name + "' targets unknown class '" + d.target_class + "'");
        if (d.items.empty()) throw InvariantError("dimension '" + d.name + "' has no items");
        for (const auto& item : d.items) {
            if (text::is_blank(item.text))
                throw InvariantError("dimension '" + d.name + "' has an item with blank text");
            if (ins.instrument_type == InstrumentType::codebook &&
                (!item.description || text::is_blank(*item.description)))
                throw InvariantError("codebook item '" + item.text + "' in dimension '" + d.name +
                                     "' needs a description");
        }
    }
}

Instrument parse_instrument(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("instrument file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("instrument file must hold a JSON object");

    Instrument ins;
    ins.construct = text::nfc(jsonio::require_string(doc, "construct", "instrument"));
    ins.instrument_type = parse_type(jsonio::require_string(doc, "instrument_type", "instrument"));
    ins.text_genre = text::nfc(jsonio::require_string(doc, "text_genre", "instrument"));

    const auto& classes = jsonio::require_array(doc, "classes", "instrument");
    if (classes.empty()) throw SchemaError("classes must be non-empty");
    for (const auto& c : classes) {
        if (!c.is_string()) throw SchemaError("classes must hold strings");
        ins.classes.push_back(text::nfc(c.get<std::string>()));
    }

    const auto& dims = jsonio::require_array(doc, "dimensions", "instrument");
    for (size_t i = 0; i < dims.size(); ++i) {
        const auto& d = dims[i];
        const std::string where = "dimensions[" + std::to_string(i) + "]";
        if (!d.is_object()) throw SchemaError(where + " must be an object");
        Dimension dim;
        dim.name = text::nfc(jsonio::require_string(d, "name", where));
        dim.target_class = text::nfc(jsonio::require_string(d, "target_class", where));
        dim.description = optional_text(d, "description", where);
        const auto& items = jsonio::require_array(d, "items", where);
        for (size_t j = 0; j < items.size(); ++j) {
            const auto& it = items[j];
            const std::string iwhere = where + ".items[" + std::to_string(j) + "]";
            if (!it.is_object()) throw SchemaError(iwhere + " must be an object");
            InstrumentItem item;
            item.text = text::nfc(jsonio::require_string(it, "text", iwhere));
            item.description = optional_text(it, "description", iwhere);
            dim.items.push_back(std::move(item));
        }
        ins.dimensions.push_back(std::move(dim));
    }
    validate(ins);
    return ins;
}

Instrument load_instrument(const std::filesystem::path& path) {
    return parse_instrument(jsonio::read_file(path));
}

std::string serialize_instrument(const Instrument& ins) {
    json doc;
    doc["construct"] = ins.construct;
    doc["instrument_type"] = type_name(ins.instrument_type);
    doc["text_genre"] = ins.text_genre;
    doc["classes"] = ins.classes;
    doc["dimensions"] = json::array();
    for (const auto& d : ins.dimensions) {
        json jd;
        jd["name"] = d.name;
        jd["target_class"] = d.target_class;
        if (d.description) jd["description"] = *d.description;
        jd["items"] = json::array();
        for (const auto& item : d.items) {
            json ji;
            ji["text"] = item.text;
            if (item.description) ji["description"] = *item.description;
            jd["items"].push_back(std::move(ji));
        }
        doc["dimensions"].push_back(std::move(jd));
    }
    return doc.dump(2) + "\n";
}

SampledItem sample_item(const Instrument& ins, std::string_view target_class, Rng& rng) {
    std::vector<SampledItem> pool;
    for (const auto& d : ins.dimensions) {
        if (d.target_class != target_class) continue;
        for (const auto& item : d.items) pool.push_back({&d, &item});
    }
    if (pool.empty())
        throw PreconditionError("no dimension targets class '" + std::string(target_class) + "'");
    return pool[rng.uniform_index(pool.size())];
}

} // namespace synthmix
