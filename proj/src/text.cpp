#include "synthmix/text.hpp"

#include "synthmix/error.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cctype>

namespace synthmix::text {

namespace {

constexpr std::string_view kSpace = " \t\r\n\f\v";

bool valid_utf8(std::string_view s) {
    const auto* p = reinterpret_cast<const uint8_t*>(s.data());
    int32_t i = 0;
    const auto len = static_cast<int32_t>(s.size());
    while (i < len) {
        UChar32 c;
        U8_NEXT(p, i, len, c);
        if (c < 0) return false;
    }
    return true;
}

bool is_word_cp(UChar32 c) {
    return u_isalnum(c) || u_hasBinaryProperty(c, UCHAR_ALPHABETIC);
}

bool is_joiner(UChar32 c) {
    return c == '\'' || c == '-' || c == 0x2019;
}

} // namespace

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(kSpace);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(kSpace);
    return std::string(s.substr(b, e - b + 1));
}

bool is_blank(std::string_view s) {
    return s.find_first_not_of(kSpace) == std::string_view::npos;
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string nfc(std::string_view utf8) {
    if (!valid_utf8(utf8)) throw SchemaError("text is not valid UTF-8");
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
    auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    if (norm->isNormalized(src, status) && U_SUCCESS(status)) return std::string(utf8);
    status = U_ZERO_ERROR;
    icu::UnicodeString dst = norm->normalize(src, status);
    if (U_FAILURE(status)) throw Error("NFC normalization failed");
    std::string out;
    dst.toUTF8String(out);
    return out;
}

std::string fold_case(std::string_view utf8) {
    auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
    u.foldCase();
    std::string out;
    u.toUTF8String(out);
    return out;
}

std::vector<std::string> words(std::string_view utf8) {
    std::vector<std::string> out;
    const auto* p = reinterpret_cast<const uint8_t*>(utf8.data());
    const auto len = static_cast<int32_t>(utf8.size());
    int32_t i = 0;
    int32_t start = -1;
    int32_t last_word_end = -1;
    while (i < len) {
        const int32_t at = i;
        UChar32 c;
        U8_NEXT(p, i, len, c);
        if (c >= 0 && is_word_cp(c)) {
            if (start < 0) start = at;
            last_word_end = i;
            continue;
        }
        if (start >= 0 && c >= 0 && is_joiner(c) && last_word_end == at && i < len) {
            // Joiner survives only when a word character follows directly.
            int32_t j = i;
            UChar32 next;
            U8_NEXT(p, j, len, next);
            if (next >= 0 && is_word_cp(next)) continue;
        }
        if (start >= 0) {
            out.emplace_back(utf8.substr(start, last_word_end - start));
            start = -1;
        }
    }
    if (start >= 0) out.emplace_back(utf8.substr(start, last_word_end - start));
    return out;
}

std::vector<std::string_view> code_points(std::string_view utf8) {
    std::vector<std::string_view> out;
    const auto* p = reinterpret_cast<const uint8_t*>(utf8.data());
    const auto len = static_cast<int32_t>(utf8.size());
    int32_t i = 0;
    while (i < len) {
        const int32_t at = i;
        UChar32 c;
        U8_NEXT(p, i, len, c);
        out.push_back(utf8.substr(at, i - at));
    }
    return out;
}

std::string squeeze_space(std::string_view utf8) {
    std::string out;
    out.reserve(utf8.size());
    bool pending = false;
    for (char c : utf8) {
        if (kSpace.find(c) != std::string_view::npos) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.push_back(c);
    }
    return out;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    }
    return true;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
    if (from.empty()) return s;
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

} // namespace synthmix::text
