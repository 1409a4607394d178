#pragma once

#include "synthmix/instruments.hpp"
#include "synthmix/llm_gateway.hpp"
#include "synthmix/rng.hpp"

#include <map>
#include <string>
#include <vector>

namespace synthmix {

enum class MockMode { keyword_faithful, generic, noisy };

std::string_view to_string(MockMode m);
MockMode parse_mock_mode(std::string_view s);

/// Per-class keyword lists. Lists are disjoint across classes, sorted, and
/// never contain filler words.
struct Vocabulary {
    std::vector<std::string> classes;
    /// Hyphen-joined lowercase class name, e.g. "social-groups".
    std::map<std::string, std::string> class_keyword;
    std::map<std::string, std::vector<std::string>> keywords;

    /// class_keyword plus keywords, for one class.
    std::vector<std::string> all_for(const std::string& label) const;
};

/// Content words of each class's dimension names, descriptions and items,
/// minus stopwords and words shared between classes.
Vocabulary derive_vocabulary(const Instrument& instrument);

/// Class-neutral words the mock uses as padding.
const std::vector<std::string>& filler_words();

struct MockProfile {
    MockMode mode = MockMode::keyword_faithful;
    /// Per-text corruption probability; only read in noisy mode.
    double noise_rate = 0.0;
    Vocabulary vocabulary;

    static MockProfile from_instrument(const Instrument& instrument, MockMode mode, double noise_rate = 0.0);
    void validate() const;
};

/// Offline stand-in for a chat model. Generation prompts get a JSON array of
/// `expected_count` texts; classification prompts get "Category: ..." by
/// keyword vote. Pure function of (prompt, profile, rng state).
CompletionResult mock_complete(const ChatPrompt& prompt, const MockProfile& profile, Rng& rng);

/// Backend adapter: seeds the mock from the request fingerprint, so equal
/// requests (including nonce) give equal responses.
class MockBackend final : public Backend {
public:
    explicit MockBackend(MockProfile profile) : profile_(std::move(profile)) { profile_.validate(); }
    std::string send(const ChatPrompt& prompt, const GenerationConfig& config, std::string_view nonce) override;
    const MockProfile& profile() const noexcept { return profile_; }

private:
    MockProfile profile_;
};

} // namespace synthmix
