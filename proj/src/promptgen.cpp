#include "synthmix/promptgen.hpp"

#include "synthmix/error.hpp"
#include "synthmix/json_io.hpp"
#include "synthmix/text.hpp"

#include <nlohmann/json.hpp>

#include <regex>

namespace synthmix {

using nlohmann::json;

namespace {

const std::regex& list_token() {
    static const std::regex re(R"(\[List of [^\]]*\])");
    return re;
}

std::string quote(std::string_view s) {
    std::string out = "\"";
    out.append(s);
    out.push_back('"');
    return out;
}

std::string render(std::string tmpl, const std::map<std::string, std::string>& values,
                   const std::string& seed_list) {
    for (const auto& [token, value] : values) tmpl = text::replace_all(std::move(tmpl), token, value);
    if (!seed_list.empty()) tmpl = std::regex_replace(tmpl, list_token(), seed_list);
    return tmpl;
}

bool uses(const MessageTemplate& t, std::string_view token) {
    return t.system.find(token) != std::string::npos || t.user.find(token) != std::string::npos;
}

// Opening/closing quote pairs accepted around generated texts.
bool strip_quotes(std::string& s) {
    static const std::pair<std::string_view, std::string_view> kPairs[] = {
        {"\"", "\""}, {"\xE2\x80\x9C", "\xE2\x80\x9D"}, {"\xE2\x80\x9E", "\xE2\x80\x9C"}, {"'", "'"}};
    for (const auto& [open, close] : kPairs) {
        if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
            s = text::trim(std::string_view(s).substr(open.size(), s.size() - open.size() - close.size()));
            return true;
        }
    }
    return false;
}

// "1.", "2)", "-", "*", "•" list prefixes.
bool strip_numbering(std::string& s) {
    static const std::regex re(R"(^\s*(?:\d{1,3}\s*[.):]|[-*]|\xE2\x80\xA2)\s+)");
    std::smatch m;
    if (std::regex_search(s, m, re)) {
        s = text::trim(std::string_view(s).substr(m.length(0)));
        return true;
    }
    return false;
}

std::string clean_text(std::string s) {
    s = text::trim(s);
    strip_numbering(s);
    strip_quotes(s);
    return text::nfc(s);
}

std::string strip_code_fence(std::string_view raw) {
    std::string s = text::trim(raw);
    if (s.starts_with("```")) {
        auto nl = s.find('\n');
        auto end = s.rfind("```");
        if (nl != std::string::npos && end != std::string::npos && end > nl)
            return text::trim(std::string_view(s).substr(nl + 1, end - nl - 1));
    }
    return s;
}

void collect_json_texts(const json& node, std::vector<std::string>& out) {
    if (node.is_string()) {
        out.push_back(node.get<std::string>());
    } else if (node.is_array()) {
        for (const auto& e : node) collect_json_texts(e, out);
    } else if (node.is_object()) {
        for (const char* key : {"text", "tweet", "sentence", "content"}) {
            auto it = node.find(key);
            if (it != node.end() && it->is_string()) {
                out.push_back(it->get<std::string>());
                return;
            }
        }
        // Wrapper objects such as {"tweets": [...]}.
        for (const auto& [_, value] : node.items())
            if (value.is_array()) collect_json_texts(value, out);
    }
}

std::optional<std::vector<std::string>> try_json(std::string_view body) {
    auto attempt = [](std::string_view s) -> std::optional<std::vector<std::string>> {
        json doc = json::parse(s, nullptr, false);
        if (doc.is_discarded() || !(doc.is_array() || doc.is_object())) return std::nullopt;
        std::vector<std::string> texts;
        collect_json_texts(doc, texts);
        if (texts.empty()) return std::nullopt;
        return texts;
    };
    if (auto r = attempt(body)) return r;
    auto open = body.find('[');
    auto close = body.rfind(']');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open)
        return attempt(body.substr(open, close - open + 1));
    return std::nullopt;
}

std::vector<std::string> quoted_fallback(std::string_view body) {
    std::vector<std::string> out;
    // Line-oriented first: numbered or bulleted entries, and whole-line quotes.
    size_t start = 0;
    while (start <= body.size()) {
        auto end = body.find('\n', start);
        if (end == std::string_view::npos) end = body.size();
        std::string line = text::trim(body.substr(start, end - start));
        start = end + 1;
        if (line.empty()) continue;
        const bool numbered = strip_numbering(line);
        const bool quoted = strip_quotes(line);
        if ((numbered || quoted) && !text::is_blank(line)) out.push_back(line);
    }
    if (!out.empty()) return out;
    // Inline quoted segments, e.g. "a", "b", "c" on one line.
    static const std::regex re("\"([^\"]+)\"|\xE2\x80\x9C([^\xE2]+)\xE2\x80\x9D");
    std::string s(body);
    for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
        std::string t = (*it)[1].matched ? (*it)[1].str() : (*it)[2].str();
        if (!text::is_blank(t)) out.push_back(text::trim(t));
    }
    return out;
}

std::string strip_label_decoration(std::string_view s) {
    static constexpr std::string_view kDeco = " \t\r\n[](){}\"'*`.,:;";
    auto b = s.find_first_not_of(kDeco);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(kDeco);
    return std::string(s.substr(b, e - b + 1));
}

} // namespace

const MessageTemplate& TemplateSet::for_cell(const StrategyCell& cell) const {
    auto it = cells.find(cell.key());
    if (it == cells.end())
        throw ConfigError("template set '" + genre + "' has no template for cell " + cell.key());
    return it->second;
}

TemplateSet parse_template_set(std::string_view json_text) {
    json doc = jsonio::parse_or_throw(json_text, "template file");
    if (!doc.is_object()) throw SchemaError("template file must hold a JSON object");
    TemplateSet set;
    set.genre = jsonio::require_string(doc, "genre", "templates");
    if (auto it = doc.find("seed_examples"); it != doc.end()) {
        if (!it->is_number_integer() || it->get<int>() < 1)
            throw SchemaError("templates: seed_examples must be a positive integer");
        set.seed_examples = it->get<int>();
    }
    auto cells = doc.find("cells");
    if (cells == doc.end() || !cells->is_object()) throw SchemaError("templates: missing object 'cells'");
    for (const auto& [key, value] : cells->items()) {
        const auto cell = StrategyCell::parse(key);
        MessageTemplate t;
        t.system = jsonio::require_string(value, "system", "templates.cells." + key);
        t.user = jsonio::require_string(value, "user", "templates.cells." + key);
        if (t.user.find("quotation marks") == std::string::npos)
            throw SchemaError("templates.cells." + key + ": user message must ask for quotation marks");
        set.cells[cell.key()] = std::move(t);
    }
    for (const auto& cell : StrategyCell::all())
        if (!set.cells.contains(cell.key()))
            throw SchemaError("templates: genre '" + set.genre + "' lacks cell " + cell.key());
    return set;
}

TemplateSet load_template_set(const std::filesystem::path& path) {
    return parse_template_set(jsonio::read_file(path));
}

TemplateLibrary TemplateLibrary::load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw IoError("template directory '" + dir.string() + "' not found");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    TemplateLibrary lib;
    for (const auto& f : files) lib.add(load_template_set(f));
    return lib;
}

void TemplateLibrary::add(TemplateSet set) {
    auto genre = set.genre;
    sets_.insert_or_assign(std::move(genre), std::move(set));
}

const TemplateSet& TemplateLibrary::for_genre(std::string_view genre) const {
    auto it = sets_.find(genre);
    if (it == sets_.end()) throw ConfigError("no prompt templates for genre '" + std::string(genre) + "'");
    return it->second;
}

GenerationBatch build_generation_prompt(const StrategyCell& cell, const TemplateSet& templates,
                                        const Instrument& instrument, std::string_view target_class,
                                        const std::vector<SeedExample>& seed_examples, int batch_size,
                                        Rng& rng) {
    if (!instrument.has_class(target_class))
        throw PreconditionError("unknown target class '" + std::string(target_class) + "'");
    if (batch_size < 1) throw PreconditionError("batch_size must be positive");

    const MessageTemplate& tmpl = templates.for_cell(cell);
    GenerationBatch batch;
    batch.target_class = std::string(target_class);
    batch.strategy = cell;

    std::map<std::string, std::string> values;
    values["[count]"] = std::to_string(batch_size);
    values["[topic]"] = std::string(target_class);
    values["[class]"] = std::string(target_class);

    if (cell.instruction == Instruction::theory_driven) {
        if (!instrument.targets(target_class))
            throw PreconditionError("instrument has no items for class '" + std::string(target_class) + "'");
        const auto picked = sample_item(instrument, target_class, rng);
        batch.instrument_item = std::make_pair(picked.dimension->name, picked.item->text);
        values["[Random Survey Item]"] = picked.item->text;
        values["[subtopic]"] = picked.item->text;
        const auto& description = picked.item->description ? picked.item->description : picked.dimension->description;
        if (description) {
            values["[topic description]"] = *description;
        } else if (uses(tmpl, "[topic description]")) {
            throw PreconditionError("item '" + picked.item->text + "' has no description for [topic description]");
        }
    }

    std::string seed_list;
    if (cell.generation == Generation::alternation) {
        if (seed_examples.empty()) throw PreconditionError("alternation prompts need seed examples, got none");
        if (static_cast<int>(seed_examples.size()) != templates.seed_examples)
            throw PreconditionError("alternation prompts for genre '" + templates.genre + "' need " +
                                    std::to_string(templates.seed_examples) + " seed examples, got " +
                                    std::to_string(seed_examples.size()));
        std::vector<std::string> quoted;
        for (const auto& s : seed_examples) quoted.push_back(quote(s.text));
        seed_list = text::join(quoted, ", ");
        values["[Example sentence]"] = quoted.front();
        batch.seed_examples = seed_examples;
    }

    batch.prompt.system_message = render(tmpl.system, values, seed_list);
    batch.prompt.user_message = render(tmpl.user, values, seed_list);
    batch.prompt.expected_count = batch_size;

    if (has_unresolved_placeholder(batch.prompt.system_message) ||
        has_unresolved_placeholder(batch.prompt.user_message))
        throw PreconditionError("template for cell " + cell.key() + " left a placeholder unresolved");
    return batch;
}

ParsedGeneration parse_generation_response(std::string_view raw, int expected_count,
                                           std::string_view target_class) {
    if (text::is_blank(raw)) throw GenerationParseError("empty generation response", std::string(raw));
    const std::string body = strip_code_fence(raw);

    std::vector<std::string> texts;
    ParsedGeneration out;
    bool from_json = false;
    if (auto parsed = try_json(body)) {
        texts = std::move(*parsed);
        from_json = true;
    } else {
        texts = quoted_fallback(body);
        if (!texts.empty()) out.warnings.push_back("response was not a JSON array; used quoted-text fallback");
    }

    for (auto& t : texts) {
        // JSON items are taken as written; list markers and quotes only matter for free text.
        std::string cleaned = from_json ? text::nfc(text::trim(t)) : clean_text(std::move(t));
        if (text::is_blank(cleaned)) continue;
        Example ex;
        ex.text = std::move(cleaned);
        ex.label = std::string(target_class);
        ex.origin = Origin::synthetic;
        ex.provenance = Provenance{};
        out.examples.push_back(std::move(ex));
    }
    if (out.examples.empty()) throw GenerationParseError("generation response held no usable texts", std::string(raw));
    if (static_cast<int>(out.examples.size()) > expected_count) {
        out.warnings.push_back("response held " + std::to_string(out.examples.size()) + " texts; kept the first " +
                               std::to_string(expected_count));
        out.examples.resize(static_cast<size_t>(expected_count));
    } else if (static_cast<int>(out.examples.size()) < expected_count) {
        out.warnings.push_back("response held " + std::to_string(out.examples.size()) + " of " +
                               std::to_string(expected_count) + " requested texts");
    }
    return out;
}

std::string serialize_generation(const std::vector<Example>& examples) {
    json arr = json::array();
    for (const auto& e : examples) arr.push_back(e.text);
    return arr.dump();
}

ChatPrompt build_classification_prompt(const std::vector<std::string>& labels, std::string_view sentence) {
    if (labels.empty()) throw PreconditionError("classification prompt needs at least one label");
    if (text::is_blank(sentence)) throw PreconditionError("classification prompt needs a non-blank sentence");
    ChatPrompt p;
    p.system_message = "You are a classifier.";
    p.user_message = "Classify the following sentence into one of these categories:\n[" + text::join(labels, ", ") +
                     "].\nProvide your response in the following format:\nCategory: [category]\n"
                     "Explanation: [explanation]\nSentence: " +
                     std::string(sentence) + ":";
    p.expected_count = 1;
    return p;
}

std::string parse_classification_response(std::string_view raw, const std::vector<std::string>& labels) {
    static constexpr std::string_view kMarker = "category:";
    const std::string lowered = text::ascii_lower(raw);
    auto pos = lowered.find(kMarker);
    if (pos == std::string::npos) throw ClassificationParseError("response has no 'Category:' line");
    auto rest = raw.substr(pos + kMarker.size());
    auto eol = rest.find('\n');
    const std::string value = strip_label_decoration(rest.substr(0, eol));
    if (value.empty()) throw ClassificationParseError("'Category:' line is empty");
    const std::string folded = text::fold_case(value);
    for (const auto& label : labels)
        if (text::fold_case(label) == folded) return label;
    throw ClassificationParseError("category '" + value + "' is not one of the labels");
}

bool has_unresolved_placeholder(std::string_view message) {
    for (std::string_view token :
         {"[Random", "[topic", "[subtopic", "[Example", "[List", "[count]", "[class]"})
        if (message.find(token) != std::string_view::npos) return true;
    return false;
}

} // namespace synthmix
