#include "synthmix/mock_backend.hpp"

#include "synthmix/error.hpp"
#include "synthmix/hash.hpp"
#include "synthmix/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <regex>
#include <set>

namespace synthmix {

namespace {

const std::set<std::string>& stopwords() {
    static const std::set<std::string> s = {
        "the", "and", "for", "that", "with", "this", "are", "was", "were", "from", "but", "not", "any", "all",
        "such", "than", "then", "they", "their", "them", "those", "these", "there", "which", "who", "whom",
        "what", "when", "where", "will", "would", "should", "could", "can", "may", "might", "must", "has",
        "have", "had", "been", "being", "its", "into", "onto", "over", "under", "about", "more", "most",
        "other", "others", "also", "very", "each", "both", "either", "neither", "nor", "our", "your", "his",
        "her", "she", "him", "one", "two", "out", "off", "own", "same", "some", "via", "upon", "within",
        "without", "between", "through", "against", "among", "well", "including", "general", "generalised",
        "specific", "particular", "need", "needs", "mentions", "favourable", "references", "kinds", "items",
        "item", "support", "policies", "policy", "favour", "there", "any", "more", "no", "longer"};
    return s;
}

std::string class_keyword_of(const std::string& label) {
    std::string folded = text::fold_case(label);
    std::string out;
    for (const auto& w : text::words(folded)) {
        if (!out.empty()) out.push_back('-');
        out += w;
    }
    return out;
}

std::vector<std::string> content_words(std::string_view s) {
    std::vector<std::string> out;
    const auto& stop = stopwords();
    const auto& filler = filler_words();
    for (auto& w : text::words(text::fold_case(s))) {
        if (w.size() < 3) continue;
        if (std::all_of(w.begin(), w.end(), [](unsigned char c) { return std::isdigit(c); })) continue;
        if (stop.contains(w)) continue;
        if (std::find(filler.begin(), filler.end(), w) != filler.end()) continue;
        out.push_back(std::move(w));
    }
    return out;
}

std::set<std::string> token_set(std::string_view s) {
    std::set<std::string> out;
    for (auto& w : text::words(text::fold_case(s))) out.insert(std::move(w));
    return out;
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

const std::regex& quoted_re() {
    static const std::regex re("\"([^\"]*)\"");
    return re;
}

bool phrase_match(const std::string& haystack_folded, const std::string& needle_folded) {
    auto is_word = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || (static_cast<unsigned char>(c) & 0x80);
    };
    size_t pos = 0;
    while ((pos = haystack_folded.find(needle_folded, pos)) != std::string::npos) {
        const size_t end = pos + needle_folded.size();
        const bool left = pos == 0 || !is_word(haystack_folded[pos - 1]);
        const bool right = end >= haystack_folded.size() || !is_word(haystack_folded[end]);
        if (left && right) return true;
        ++pos;
    }
    return false;
}

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
    return v[rng.uniform_index(v.size())];
}

std::string answer_classification(const ChatPrompt& prompt, const MockProfile& profile) {
    const std::string& u = prompt.user_message;
    std::vector<std::string> labels;
    const auto open = u.find("categories:\n[");
    if (open != std::string::npos) {
        const auto start = open + std::string_view("categories:\n[").size();
        const auto close = u.find("].\n", start);
        std::string list = u.substr(start, close == std::string::npos ? std::string::npos : close - start);
        size_t p = 0;
        while (p <= list.size()) {
            auto comma = list.find(", ", p);
            if (comma == std::string::npos) comma = list.size();
            labels.push_back(list.substr(p, comma - p));
            p = comma + 2;
        }
    }
    std::string sentence;
    if (auto s = u.rfind("\nSentence: "); s != std::string::npos) sentence = u.substr(s + 11);
    if (!sentence.empty() && sentence.back() == ':') sentence.pop_back();

    const auto tokens = token_set(sentence);
    std::string best = labels.empty() ? std::string("unknown") : labels.front();
    std::size_t best_score = 0;
    for (const auto& label : labels) {
        if (std::find(profile.vocabulary.classes.begin(), profile.vocabulary.classes.end(), label) ==
            profile.vocabulary.classes.end())
            continue;
        std::size_t score = 0;
        for (const auto& kw : profile.vocabulary.all_for(label)) score += tokens.count(kw);
        if (score > best_score) {
            best_score = score;
            best = label;
        }
    }
    return "Category: " + best + "\nExplanation: keyword match (" + std::to_string(best_score) + ")";
}

} // namespace

std::string_view to_string(MockMode m) {
    switch (m) {
    case MockMode::keyword_faithful: return "keyword_faithful";
    case MockMode::generic: return "generic";
    case MockMode::noisy: return "noisy";
    }
    return "?";
}

MockMode parse_mock_mode(std::string_view s) {
    if (s == "keyword_faithful") return MockMode::keyword_faithful;
    if (s == "generic") return MockMode::generic;
    if (s == "noisy") return MockMode::noisy;
    throw ConfigError("unknown mock mode '" + std::string(s) + "'");
}

const std::vector<std::string>& filler_words() {
    static const std::vector<std::string> words = {
        "today",  "really",   "people", "think",  "time",    "going",  "know",   "just",    "thing",
        "year",   "week",     "maybe",  "always", "never",   "often",  "still",  "again",   "right",
        "little", "much",     "many",   "good",   "new",     "old",    "first",  "last",    "long",
        "great",  "day",      "way",    "world",  "life",    "hand",   "part",   "place",   "case",
        "point",  "fact",     "number", "group",  "problem", "look",   "want",   "give",    "use",
        "find",   "tell",     "ask",    "seem",   "feel",    "try",    "leave",  "call",    "keep",
        "let",    "begin",    "show",   "hear",   "play",    "run",    "move",   "live",    "believe",
        "bring",  "happen",   "write",  "sit",    "stand",   "lose",   "pay",    "meet",    "continue",
        "learn",  "change",   "lead",   "watch",  "follow",  "stop",   "create", "speak",   "read",
        "spend",  "grow",     "open",   "walk",   "win",     "offer",  "remember", "consider", "appear"};
    return words;
}

std::vector<std::string> Vocabulary::all_for(const std::string& label) const {
    std::vector<std::string> out;
    if (auto it = class_keyword.find(label); it != class_keyword.end()) out.push_back(it->second);
    if (auto it = keywords.find(label); it != keywords.end()) out.insert(out.end(), it->second.begin(), it->second.end());
    return out;
}

Vocabulary derive_vocabulary(const Instrument& instrument) {
    Vocabulary v;
    v.classes = instrument.classes;
    std::map<std::string, std::set<std::string>> raw;
    for (const auto& c : instrument.classes) {
        v.class_keyword[c] = class_keyword_of(c);
        raw[c];
    }
    for (const auto& d : instrument.dimensions) {
        auto& bag = raw[d.target_class];
        auto add = [&](std::string_view s) {
            for (auto& w : content_words(s)) bag.insert(std::move(w));
        };
        add(d.name);
        if (d.description) add(*d.description);
        for (const auto& item : d.items) {
            add(item.text);
            if (item.description) add(*item.description);
        }
    }
    std::map<std::string, int> owners;
    for (const auto& [_, bag] : raw)
        for (const auto& w : bag) ++owners[w];
    std::set<std::string> class_kws;
    for (const auto& [_, kw] : v.class_keyword) class_kws.insert(kw);
    for (const auto& c : instrument.classes) {
        auto& list = v.keywords[c];
        for (const auto& w : raw[c])
            if (owners[w] == 1 && !class_kws.contains(w)) list.push_back(w);
    }
    return v;
}

MockProfile MockProfile::from_instrument(const Instrument& instrument, MockMode mode, double noise_rate) {
    MockProfile p;
    p.mode = mode;
    p.noise_rate = noise_rate;
    p.vocabulary = derive_vocabulary(instrument);
    p.validate();
    return p;
}

void MockProfile::validate() const {
    if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) throw ConfigError("mock noise rate must lie in [0, 1]");
    if (vocabulary.classes.empty()) throw ConfigError("mock profile needs a vocabulary");
}

CompletionResult mock_complete(const ChatPrompt& prompt, const MockProfile& profile, Rng& rng) {
    CompletionResult result;
    result.model_name = "mock";
    if (prompt.user_message.find("Classify the following sentence") != std::string::npos) {
        result.raw_text = answer_classification(prompt, profile);
        return result;
    }

    const auto& vocab = profile.vocabulary;

    // Seed texts are the quoted segments; everything else is instruction.
    std::vector<std::string> seeds;
    for (auto it = std::sregex_iterator(prompt.user_message.begin(), prompt.user_message.end(), quoted_re());
         it != std::sregex_iterator(); ++it)
        if (!text::is_blank((*it)[1].str())) seeds.push_back((*it)[1].str());
    const std::string instruction =
        prompt.system_message + "\n" + std::regex_replace(prompt.user_message, quoted_re(), " ");
    const std::string instruction_folded = text::fold_case(instruction);
    const auto instruction_tokens = token_set(instruction);

    std::string target = vocab.classes.front();
    double best = -1.0;
    for (const auto& c : vocab.classes) {
        double score = 0.0;
        const std::string folded = text::fold_case(c);
        if (phrase_match(instruction_folded, folded)) score += 1e6 + static_cast<double>(folded.size());
        if (auto it = vocab.keywords.find(c); it != vocab.keywords.end())
            for (const auto& kw : it->second) score += static_cast<double>(instruction_tokens.count(kw));
        if (score > best) {
            best = score;
            target = c;
        }
    }

    std::vector<std::string> visible{vocab.class_keyword.at(target)};
    for (const auto& kw : vocab.keywords.at(target))
        if (instruction_tokens.contains(kw)) visible.push_back(kw);

    std::vector<std::string> foreign;
    for (const auto& c : vocab.classes)
        if (c != target)
            for (auto& kw : vocab.all_for(c)) foreign.push_back(std::move(kw));
    const auto target_words = vocab.all_for(target);
    const std::set<std::string> target_set(target_words.begin(), target_words.end());
    const auto& filler = filler_words();

    const int count = std::max(1, prompt.expected_count);
    nlohmann::json out = nlohmann::json::array();
    for (int i = 0; i < count; ++i) {
        std::vector<std::string> tokens;
        if (!seeds.empty()) {
            tokens = split_ws(seeds[static_cast<size_t>(i) % seeds.size()]);
            if (tokens.empty()) tokens.push_back(pick(filler, rng));
            if (profile.mode == MockMode::generic) {
                tokens[rng.uniform_index(tokens.size())] = pick(filler, rng);
            } else {
                tokens[rng.uniform_index(tokens.size())] = pick(visible, rng);
                tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(rng.uniform_index(tokens.size() + 1)),
                              pick(visible, rng));
            }
        } else {
            const bool generic = profile.mode == MockMode::generic;
            for (int k = 0; k < (generic ? 0 : 2); ++k) tokens.push_back(pick(visible, rng));
            for (int k = 0; k < (generic ? 6 : 4); ++k) tokens.push_back(pick(filler, rng));
            rng.shuffle(tokens);
        }
        if (profile.mode == MockMode::noisy && rng.bernoulli(profile.noise_rate)) {
            for (auto& t : tokens) {
                if (!target_set.contains(text::fold_case(t))) continue;
                t = foreign.empty() ? pick(filler, rng) : pick(foreign, rng);
            }
        }
        out.push_back(text::join(tokens, " "));
    }
    result.raw_text = out.dump();
    return result;
}

std::string MockBackend::send(const ChatPrompt& prompt, const GenerationConfig& config, std::string_view nonce) {
    Rng rng(hash::sha256_u64(request_fingerprint(prompt, config, nonce)));
    return mock_complete(prompt, profile_, rng).raw_text;
}

} // namespace synthmix
