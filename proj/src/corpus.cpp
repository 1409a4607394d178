#include "synthmix/corpus.hpp"

#include "synthmix/csv.hpp"
#include "synthmix/error.hpp"
#include "synthmix/hash.hpp"
#include "synthmix/json_io.hpp"
#include "synthmix/text.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace synthmix {

using nlohmann::json;

namespace {

FileFormat detect_format(const std::filesystem::path& path, FileFormat requested) {
    if (requested != FileFormat::automatic) return requested;
    const auto ext = text::ascii_lower(path.extension().string());
    if (ext == ".csv") return FileFormat::csv;
    if (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") return FileFormat::jsonl;
    throw ConfigError("cannot infer format of '" + path.string() + "'; use .jsonl or .csv");
}

struct RawRow {
    std::optional<std::string> id;
    std::string text;
    std::string label;
};

std::string field_as_string(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_null()) return {};
    return v.dump();
}

std::vector<RawRow> read_jsonl_rows(std::string_view data, const LoadOptions& opt) {
    std::vector<RawRow> rows;
    size_t line_no = 0;
    size_t start = 0;
    while (start < data.size()) {
        auto end = data.find('\n', start);
        if (end == std::string_view::npos) end = data.size();
        auto line = data.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (text::is_blank(line)) continue;
        json obj = json::parse(line, nullptr, false);
        const std::string where = "line " + std::to_string(line_no);
        if (obj.is_discarded() || !obj.is_object()) throw SchemaError(where + ": not a JSON object");
        auto t = obj.find(opt.text_field);
        auto l = obj.find(opt.label_field);
        if (t == obj.end()) throw SchemaError(where + ": missing field '" + opt.text_field + "'");
        if (l == obj.end()) throw SchemaError(where + ": missing field '" + opt.label_field + "'");
        RawRow r;
        r.text = field_as_string(*t);
        r.label = field_as_string(*l);
        if (auto i = obj.find(opt.id_field); i != obj.end() && !i->is_null()) r.id = field_as_string(*i);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<RawRow> read_csv_rows(std::string_view data, const LoadOptions& opt) {
    auto table = csv::parse(data);
    if (table.empty()) return {};
    const auto& header = table.front();
    auto column = [&](const std::string& name) -> std::optional<size_t> {
        for (size_t i = 0; i < header.size(); ++i)
            if (text::trim(header[i]) == name) return i;
        return std::nullopt;
    };
    auto tc = column(opt.text_field);
    auto lc = column(opt.label_field);
    if (!tc) throw SchemaError("CSV header lacks text column '" + opt.text_field + "'");
    if (!lc) throw SchemaError("CSV header lacks label column '" + opt.label_field + "'");
    auto ic = column(opt.id_field);
    std::vector<RawRow> rows;
    for (size_t r = 1; r < table.size(); ++r) {
        const auto& row = table[r];
        if (row.size() != header.size())
            throw SchemaError("CSV row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                              " fields, header has " + std::to_string(header.size()));
        RawRow rr;
        rr.text = row[*tc];
        rr.label = row[*lc];
        if (ic && !row[*ic].empty()) rr.id = row[*ic];
        rows.push_back(std::move(rr));
    }
    return rows;
}

json provenance_json(const Provenance& p) {
    return {{"strategy", p.strategy},
            {"generator_model", p.generator_model},
            {"prompt_fingerprint", p.prompt_fingerprint},
            {"seed_example_id", p.seed_example_id}};
}

std::vector<size_t> indices_of(const Corpus& c, const std::string& label, Origin origin) {
    std::vector<size_t> out;
    for (size_t i = 0; i < c.examples.size(); ++i)
        if (c.examples[i].label == label && c.examples[i].origin == origin) out.push_back(i);
    return out;
}

Corpus empty_like(const Corpus& c) {
    Corpus out;
    out.study = c.study;
    out.classes = c.classes;
    return out;
}

} // namespace

void Corpus::validate() const {
    std::set<std::string> seen;
    const std::set<std::string> allowed(classes.begin(), classes.end());
    for (const auto& e : examples) {
        if (!seen.insert(e.id).second) throw InvariantError("duplicate example id '" + e.id + "'");
        if (!allowed.contains(e.label)) throw InvariantError("example '" + e.id + "' has unknown label '" + e.label + "'");
        if (text::is_blank(e.text)) throw InvariantError("example '" + e.id + "' has blank text");
        if (e.origin == Origin::synthetic && !e.provenance)
            throw InvariantError("synthetic example '" + e.id + "' lacks provenance");
    }
}

std::map<std::string, std::size_t> Corpus::count_by_class(std::optional<Origin> origin) const {
    std::map<std::string, std::size_t> out;
    for (const auto& c : classes) out[c] = 0;
    for (const auto& e : examples)
        if (!origin || e.origin == *origin) ++out[e.label];
    return out;
}

std::vector<std::string> Corpus::ids() const {
    std::vector<std::string> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(e.id);
    return out;
}

Corpus load_corpus(const std::filesystem::path& path, const LoadOptions& opt) {
    const std::string data = jsonio::read_file(path);
    const auto format = detect_format(path, opt.format);
    auto rows = format == FileFormat::csv ? read_csv_rows(data, opt) : read_jsonl_rows(data, opt);
    if (rows.empty()) throw SchemaError("'" + path.string() + "' holds no rows");

    Corpus corpus;
    corpus.study = opt.study;
    corpus.classes = opt.classes;
    const bool open_classes = opt.classes.empty();
    std::set<std::string> known(opt.classes.begin(), opt.classes.end());
    std::map<std::string, size_t> unknown;

    for (size_t i = 0; i < rows.size(); ++i) {
        auto& r = rows[i];
        std::string label = text::nfc(text::trim(r.label));
        if (auto a = opt.aliases.find(label); a != opt.aliases.end()) label = a->second;
        if (!known.contains(label)) {
            if (open_classes && !label.empty()) {
                known.insert(label);
                corpus.classes.push_back(label);
            } else {
                ++unknown[label];
                continue;
            }
        }
        Example ex;
        ex.text = text::nfc(r.text);
        if (text::is_blank(ex.text)) throw SchemaError("row " + std::to_string(i + 1) + " has blank text");
        ex.label = std::move(label);
        ex.origin = Origin::labeled;
        ex.id = r.id ? *r.id : fmt::format("r{:06d}-{}", i, hash::sha256_hex(ex.text).substr(0, 8));
        corpus.examples.push_back(std::move(ex));
    }
    if (!unknown.empty()) {
        std::string msg = "unknown label values in '" + path.string() + "':";
        for (const auto& [label, n] : unknown) msg += fmt::format(" '{}' x{}", label, n);
        throw SchemaError(msg);
    }
    corpus.validate();
    return corpus;
}

std::map<std::string, std::string> load_alias_map(const std::filesystem::path& path) {
    json doc = jsonio::parse_or_throw(jsonio::read_file(path), "alias map");
    if (!doc.is_object()) throw SchemaError("alias map must be a JSON object of raw -> label");
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : doc.items()) {
        if (!v.is_string()) throw SchemaError("alias map value for '" + k + "' must be a string");
        out[text::nfc(text::trim(k))] = text::nfc(v.get<std::string>());
    }
    return out;
}

std::string to_jsonl(const std::vector<Example>& examples) {
    std::string out;
    for (const auto& e : examples) {
        json j;
        j["id"] = e.id;
        j["text"] = e.text;
        j["label"] = e.label;
        j["origin"] = to_string(e.origin);
        j["provenance"] = e.provenance ? provenance_json(*e.provenance) : json(nullptr);
        out += j.dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<Example> parse_jsonl_examples(std::string_view data) {
    std::vector<Example> out;
    size_t start = 0;
    size_t line_no = 0;
    while (start < data.size()) {
        auto end = data.find('\n', start);
        if (end == std::string_view::npos) end = data.size();
        auto line = data.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (text::is_blank(line)) continue;
        json j = json::parse(line, nullptr, false);
        const std::string where = "line " + std::to_string(line_no);
        if (j.is_discarded() || !j.is_object()) throw SchemaError(where + ": not a JSON object");
        Example e;
        e.id = jsonio::require_string(j, "id", where);
        e.text = jsonio::require_string(j, "text", where);
        e.label = jsonio::require_string(j, "label", where);
        e.origin = j.contains("origin") ? parse_origin(jsonio::require_string(j, "origin", where)) : Origin::labeled;
        if (auto p = j.find("provenance"); p != j.end() && p->is_object()) {
            Provenance pv;
            pv.strategy = p->value("strategy", "");
            pv.generator_model = p->value("generator_model", "");
            pv.prompt_fingerprint = p->value("prompt_fingerprint", "");
            pv.seed_example_id = p->value("seed_example_id", "");
            e.provenance = std::move(pv);
        }
        out.push_back(std::move(e));
    }
    return out;
}

void write_examples(const std::filesystem::path& path, const std::vector<Example>& examples) {
    jsonio::write_file_atomic(path, to_jsonl(examples));
}

std::vector<Example> read_examples(const std::filesystem::path& path) {
    return parse_jsonl_examples(jsonio::read_file(path));
}

std::size_t round_half_up(double x) {
    if (!(x >= 0.0)) throw PreconditionError("round_half_up expects a non-negative value");
    return static_cast<std::size_t>(std::floor(x + 0.5 + 1e-9));
}

Corpus balance(const Corpus& corpus, std::size_t per_class_n, Rng& rng) {
    std::vector<char> keep(corpus.examples.size(), 0);
    for (const auto& label : corpus.classes) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < corpus.examples.size(); ++i)
            if (corpus.examples[i].label == label) idx.push_back(i);
        if (idx.size() < per_class_n)
            throw PreconditionError(fmt::format("class {} short by {}", label, per_class_n - idx.size()));
        for (size_t pick : rng.sample_indices(idx.size(), per_class_n)) keep[idx[pick]] = 1;
    }
    Corpus out = empty_like(corpus);
    for (size_t i = 0; i < corpus.examples.size(); ++i)
        if (keep[i]) out.examples.push_back(corpus.examples[i]);
    return out;
}

std::pair<Corpus, Corpus> split_validation(const Corpus& corpus, double fraction, Rng& rng) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw PreconditionError("validation fraction must lie in (0, 1)");
    std::vector<char> to_validation(corpus.examples.size(), 0);
    for (const auto& label : corpus.classes) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < corpus.examples.size(); ++i)
            if (corpus.examples[i].label == label) idx.push_back(i);
        if (idx.size() < 2)
            throw PreconditionError(fmt::format("class {} has {} examples; a split needs at least 2", label, idx.size()));
        const size_t k = round_half_up(fraction * static_cast<double>(idx.size()));
        for (size_t pick : rng.sample_indices(idx.size(), k)) to_validation[idx[pick]] = 1;
    }
    Corpus validation = empty_like(corpus);
    Corpus heldout = empty_like(corpus);
    for (size_t i = 0; i < corpus.examples.size(); ++i)
        (to_validation[i] ? validation : heldout).examples.push_back(corpus.examples[i]);
    return {std::move(validation), std::move(heldout)};
}

std::string_view to_string(MixScope s) {
    return s == MixScope::per_class ? "per_class" : "global";
}

MixScope parse_mix_scope(std::string_view s) {
    if (s == "per_class") return MixScope::per_class;
    if (s == "global") return MixScope::global;
    throw ConfigError("mix scope must be 'per_class' or 'global', got '" + std::string(s) + "'");
}

const ClassMix& MixPlan::for_class(std::string_view label) const {
    for (const auto& c : classes)
        if (c.label == label) return c;
    throw PreconditionError("mix plan has no class '" + std::string(label) + "'");
}

MixPlan plan_mix(const Corpus& labeled_pool, const Corpus& synthetic_pool, std::size_t per_class_n, double ratio,
                 MixScope scope) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw PreconditionError("ratio must lie in [0, 1]");
    MixPlan plan;
    plan.ratio = ratio;
    plan.per_class_total = per_class_n;
    plan.scope = scope;

    const auto labeled_supply = labeled_pool.count_by_class(Origin::labeled);
    const auto synthetic_supply = synthetic_pool.count_by_class(Origin::synthetic);
    auto supply_of = [](const std::map<std::string, size_t>& m, const std::string& c) -> size_t {
        auto it = m.find(c);
        return it == m.end() ? 0 : it->second;
    };

    for (const auto& label : labeled_pool.classes) {
        ClassMix cm;
        cm.label = label;
        cm.total = per_class_n;
        cm.has_supply = supply_of(synthetic_supply, label) > 0;
        plan.classes.push_back(cm);
    }

    if (scope == MixScope::per_class) {
        for (auto& cm : plan.classes)
            cm.synthetic = cm.has_supply ? round_half_up(ratio * static_cast<double>(per_class_n)) : 0;
    } else {
        // Spread the global synthetic demand evenly over classes with supply.
        size_t remaining = round_half_up(ratio * static_cast<double>(per_class_n * plan.classes.size()));
        std::vector<ClassMix*> open;
        for (auto& cm : plan.classes)
            if (cm.has_supply) open.push_back(&cm);
        while (remaining > 0 && !open.empty()) {
            const size_t share = std::max<size_t>(1, remaining / open.size());
            std::vector<ClassMix*> still_open;
            for (auto* cm : open) {
                const size_t cap = std::min(per_class_n, supply_of(synthetic_supply, cm->label));
                const size_t take = std::min({share, cap - cm->synthetic, remaining});
                cm->synthetic += take;
                remaining -= take;
                if (cm->synthetic < cap) still_open.push_back(cm);
            }
            open = std::move(still_open);
        }
        if (remaining > 0)
            throw PreconditionError(fmt::format("global synthetic demand exceeds supply by {}", remaining));
    }

    for (auto& cm : plan.classes) {
        cm.labeled = cm.total - cm.synthetic;
        if (!cm.has_supply && ratio > 0.0) {
            plan.asymmetric = true;
            plan.notes.push_back(fmt::format("class {} has no synthetic supply; kept all {} labeled", cm.label, cm.total));
        }
        const size_t syn = supply_of(synthetic_supply, cm.label);
        const size_t lab = supply_of(labeled_supply, cm.label);
        if (cm.synthetic > syn)
            throw PreconditionError(fmt::format("class {} needs {} synthetic examples, supply is {}", cm.label,
                                                cm.synthetic, syn));
        if (cm.labeled > lab)
            throw PreconditionError(fmt::format("class {} needs {} labeled examples, supply is {}", cm.label,
                                                cm.labeled, lab));
    }
    return plan;
}

namespace {

void take_prefix(const Corpus& pool, const std::string& label, Origin origin, size_t k, Rng rng,
                 std::vector<Example>& out) {
    const auto idx = indices_of(pool, label, origin);
    if (idx.size() < k)
        throw PreconditionError(fmt::format("pool exhausted: class {} has {} {} examples, plan needs {}", label,
                                            idx.size(), to_string(origin), k));
    for (size_t pick : rng.sample_indices(idx.size(), k)) out.push_back(pool.examples[idx[pick]]);
}

} // namespace

Corpus labeled_portion(const MixPlan& plan, const Corpus& labeled_pool, const Rng& rng) {
    Corpus out = empty_like(labeled_pool);
    for (const auto& cm : plan.classes)
        take_prefix(labeled_pool, cm.label, Origin::labeled, cm.labeled, rng.fork("labeled/" + cm.label), out.examples);
    return out;
}

Corpus materialize_mix(const MixPlan& plan, const Corpus& labeled_pool, const Corpus& synthetic_pool, const Rng& rng) {
    Corpus out = empty_like(labeled_pool);
    for (const auto& cm : plan.classes) {
        take_prefix(labeled_pool, cm.label, Origin::labeled, cm.labeled, rng.fork("labeled/" + cm.label), out.examples);
        take_prefix(synthetic_pool, cm.label, Origin::synthetic, cm.synthetic, rng.fork("synthetic/" + cm.label),
                    out.examples);
    }
    Rng shuffler = rng.fork("shuffle");
    shuffler.shuffle(out.examples);
    out.validate();
    return out;
}

Corpus without_synthetic(const Corpus& mixed) {
    Corpus out = empty_like(mixed);
    for (const auto& e : mixed.examples)
        if (e.origin == Origin::labeled) out.examples.push_back(e);
    return out;
}

} // namespace synthmix
