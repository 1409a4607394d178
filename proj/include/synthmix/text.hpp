#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace synthmix::text {

std::string trim(std::string_view s);
bool is_blank(std::string_view s);

/// ASCII-only lowercase; used for identifiers and enum spellings.
std::string ascii_lower(std::string_view s);

/// Validates UTF-8 and returns the NFC form. Throws SchemaError on invalid UTF-8.
std::string nfc(std::string_view utf8);

/// Full Unicode case folding.
std::string fold_case(std::string_view utf8);

/// Word tokens: maximal runs of letters/digits, joined across single inner
/// apostrophes or hyphens ("non-sexist" is one token). Case is preserved.
std::vector<std::string> words(std::string_view utf8);

/// Unicode code points of a UTF-8 string, each as its own UTF-8 substring.
std::vector<std::string_view> code_points(std::string_view utf8);

/// Collapses whitespace runs to one ASCII space and trims.
std::string squeeze_space(std::string_view utf8);

bool starts_with_ci(std::string_view s, std::string_view prefix);

std::string replace_all(std::string s, std::string_view from, std::string_view to);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

} // namespace synthmix::text
