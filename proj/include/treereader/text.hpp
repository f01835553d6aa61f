#pragma once

// Plain-text primitives shared by ingestion, anchoring and summarization:
// UTF-8 decoding, Unicode normalization with a raw<->normalized offset map,
// whitespace tokenization and sentence segmentation.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

namespace treereader {

/// Half-open byte range [start, end) into a UTF-8 string.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;

    [[nodiscard]] std::size_t size() const noexcept { return end - start; }
    [[nodiscard]] bool empty() const noexcept { return end == start; }
    friend bool operator==(const Span&, const Span&) = default;
};

namespace utf8 {

inline constexpr char32_t replacement = 0xFFFD;

struct Decoded {
    char32_t cp;
    std::size_t length; // bytes consumed, >= 1
};

/// Decodes one code point at `pos`. Malformed sequences decode to U+FFFD and
/// consume a single byte.
inline Decoded decode(std::string_view s, std::size_t pos) noexcept {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) return {b0, 1};
    auto cont = [&](std::size_t i) -> int {
        if (pos + i >= s.size()) return -1;
        const auto b = static_cast<unsigned char>(s[pos + i]);
        return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
    };
    if (b0 >= 0xC2 && b0 <= 0xDF) {
        const int c1 = cont(1);
        if (c1 < 0) return {replacement, 1};
        return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
    }
    if (b0 >= 0xE0 && b0 <= 0xEF) {
        const int c1 = cont(1), c2 = cont(2);
        if (c1 < 0 || c2 < 0) return {replacement, 1};
        const char32_t cp = ((b0 & 0x0F) << 12) | (c1 << 6) | c2;
        if (cp < 0x800 || (cp >= 0xD800 && cp <= 0xDFFF)) return {replacement, 1};
        return {cp, 3};
    }
    if (b0 >= 0xF0 && b0 <= 0xF4) {
        const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
        if (c1 < 0 || c2 < 0 || c3 < 0) return {replacement, 1};
        const char32_t cp = ((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3;
        if (cp < 0x10000 || cp > 0x10FFFF) return {replacement, 1};
        return {cp, 4};
    }
    return {replacement, 1};
}

inline void append(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline bool is_valid(std::string_view s) noexcept {
    for (std::size_t i = 0; i < s.size();) {
        const auto d = decode(s, i);
        if (d.cp == replacement && !(d.length == 3 && s.substr(i, 3) == "\xEF\xBF\xBD")) return false;
        i += d.length;
    }
    return true;
}

inline std::u32string to_u32(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto d = decode(s, i);
        out.push_back(d.cp);
        i += d.length;
    }
    return out;
}

inline std::string from_u32(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : s) append(out, cp);
    return out;
}

} // namespace utf8

inline bool is_space(char32_t cp) noexcept {
    if (cp < 0x80) return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v';
    return u_isUWhiteSpace(static_cast<UChar32>(cp)) != 0;
}

/// Maps every byte of a normalized string back to the raw bytes it came from.
/// Bytes produced by the same normalization unit share one raw range.
class OffsetMap {
public:
    OffsetMap() = default;
    OffsetMap(std::vector<std::size_t> begin, std::vector<std::size_t> end, std::size_t raw_size)
        : raw_begin_(std::move(begin)), raw_end_(std::move(end)), raw_size_(raw_size) {}

    [[nodiscard]] std::size_t size() const noexcept { return raw_begin_.size(); }

    /// Raw span covering every raw byte that contributed to `normalized`.
    [[nodiscard]] Span to_raw(Span normalized) const noexcept {
        if (raw_begin_.empty()) return {0, 0};
        if (normalized.empty()) {
            const std::size_t p = normalized.start < size() ? raw_begin_[normalized.start]
                                                            : raw_end_.back();
            return {p, p};
        }
        return {raw_begin_[normalized.start], raw_end_[normalized.end - 1]};
    }

    /// True when `pos` does not split the output of a single normalization unit.
    [[nodiscard]] bool is_boundary(std::size_t pos) const noexcept {
        if (pos == 0 || pos >= size()) return true;
        return raw_begin_[pos] != raw_begin_[pos - 1] || raw_end_[pos] != raw_end_[pos - 1];
    }

    [[nodiscard]] std::size_t raw_size() const noexcept { return raw_size_; }

private:
    std::vector<std::size_t> raw_begin_;
    std::vector<std::size_t> raw_end_;
    std::size_t raw_size_ = 0;
};

struct NormalizedText {
    std::string text;
    OffsetMap offsets;
};

struct NormalizeOptions {
    bool casefold = false;
};

namespace detail {

inline const icu::Normalizer2& nfc() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status) || n == nullptr) throw std::runtime_error("ICU NFC normalizer unavailable");
    return *n;
}

// Normalizes one unit (a starter plus its combining marks) and appends the
// resulting code points.
inline void normalize_unit(std::u32string_view unit, bool casefold, std::u32string& out) {
    const bool ascii = std::all_of(unit.begin(), unit.end(), [](char32_t c) { return c < 0x80; });
    if (ascii) {
        for (char32_t c : unit) {
            out.push_back(casefold && c >= 'A' && c <= 'Z' ? c + 32 : c);
        }
        return;
    }
    icu::UnicodeString us;
    for (char32_t c : unit) us.append(static_cast<UChar32>(c));
    UErrorCode status = U_ZERO_ERROR;
    icu::UnicodeString normalized = nfc().normalize(us, status);
    if (U_FAILURE(status)) normalized = us;
    if (casefold) {
        normalized.foldCase();
        status = U_ZERO_ERROR;
        icu::UnicodeString refolded = nfc().normalize(normalized, status);
        if (U_SUCCESS(status)) normalized = refolded;
    }
    for (int32_t i = 0; i < normalized.length();) {
        const UChar32 c = normalized.char32At(i);
        out.push_back(static_cast<char32_t>(c));
        i += U16_LENGTH(c);
    }
}

} // namespace detail

/// NFC-normalizes `raw`, collapses whitespace runs to one space and trims
/// both ends. The returned offset map recovers the raw span behind any
/// normalized span.
inline NormalizedText normalize_text(std::string_view raw, NormalizeOptions options = {}) {
    struct Cp {
        char32_t cp;
        std::size_t begin;
        std::size_t end;
    };
    std::vector<Cp> decoded;
    decoded.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size();) {
        const auto d = utf8::decode(raw, i);
        decoded.push_back({d.cp, i, i + d.length});
        i += d.length;
    }

    // Normalize unit by unit so each output code point knows its raw origin.
    std::vector<Cp> normalized;
    normalized.reserve(decoded.size());
    const auto& nfc = detail::nfc();
    std::u32string unit_out;
    for (std::size_t i = 0; i < decoded.size();) {
        std::size_t j = i + 1;
        while (j < decoded.size() && decoded[j].cp >= 0x80 &&
               !nfc.hasBoundaryBefore(static_cast<UChar32>(decoded[j].cp))) {
            ++j;
        }
        std::u32string unit;
        for (std::size_t k = i; k < j; ++k) unit.push_back(decoded[k].cp);
        unit_out.clear();
        detail::normalize_unit(unit, options.casefold, unit_out);
        for (char32_t c : unit_out) normalized.push_back({c, decoded[i].begin, decoded[j - 1].end});
        i = j;
    }

    NormalizedText result;
    std::vector<std::size_t> begins, ends;
    begins.reserve(raw.size());
    ends.reserve(raw.size());
    auto emit = [&](char32_t cp, std::size_t b, std::size_t e) {
        const std::size_t before = result.text.size();
        utf8::append(result.text, cp);
        for (std::size_t k = before; k < result.text.size(); ++k) {
            begins.push_back(b);
            ends.push_back(e);
        }
    };

    std::size_t i = 0;
    while (i < normalized.size() && is_space(normalized[i].cp)) ++i;
    while (i < normalized.size()) {
        if (is_space(normalized[i].cp)) {
            std::size_t j = i;
            while (j < normalized.size() && is_space(normalized[j].cp)) ++j;
            if (j == normalized.size()) break;
            emit(U' ', normalized[i].begin, normalized[j - 1].end);
            i = j;
        } else {
            emit(normalized[i].cp, normalized[i].begin, normalized[i].end);
            ++i;
        }
    }
    result.offsets = OffsetMap(std::move(begins), std::move(ends), raw.size());
    return result;
}

inline std::string normalized(std::string_view raw, NormalizeOptions options = {}) {
    return normalize_text(raw, options).text;
}

/// Whitespace-separated tokens. Hyphenated compounds stay one token.
inline std::vector<Span> token_spans(std::string_view text) {
    std::vector<Span> out;
    std::size_t i = 0;
    std::size_t token_start = 0;
    bool in_token = false;
    while (i < text.size()) {
        const auto d = utf8::decode(text, i);
        const bool space = is_space(d.cp);
        if (space && in_token) {
            out.push_back({token_start, i});
            in_token = false;
        } else if (!space && !in_token) {
            token_start = i;
            in_token = true;
        }
        i += d.length;
    }
    if (in_token) out.push_back({token_start, text.size()});
    return out;
}

inline std::size_t word_count(std::string_view text) { return token_spans(text).size(); }

/// First `n` words of `text`, with an ellipsis when truncated.
inline std::string first_words(std::string_view text, std::size_t n) {
    const auto tokens = token_spans(text);
    if (tokens.size() <= n) return std::string(text.substr(0, tokens.empty() ? 0 : tokens.back().end));
    std::string out(text.substr(tokens.front().start, tokens[n - 1].end - tokens.front().start));
    out += "\xE2\x80\xA6";
    return out;
}

namespace detail {

inline constexpr std::array<std::string_view, 28> abbreviations = {
    "e.g", "i.e", "et al", "al", "fig", "figs", "eq", "eqs", "ref", "refs", "sec", "vs", "etc", "cf",
    "approx", "no", "dr", "mr", "mrs", "ms", "prof", "vol", "pp", "ch", "tab", "resp", "incl", "suppl"};

inline bool is_closer(char c) noexcept { return c == ')' || c == ']' || c == '"' || c == '\''; }

// "Figure 3." or "Table S2." opening the text or a line: a caption label,
// not a sentence.
inline bool is_caption_label(std::string_view text, std::size_t number_start, std::size_t period) {
    if (number_start == period || !std::isdigit(static_cast<unsigned char>(text[number_start]))) return false;
    if (number_start < 2 || text[number_start - 1] != ' ') return false;
    std::size_t b = number_start - 1;
    while (b > 0 && !is_space(static_cast<unsigned char>(text[b - 1]))) --b;
    if (b > 0 && text[b - 1] != '\n') return false;
    std::string word(text.substr(b, number_start - 1 - b));
    std::transform(word.begin(), word.end(), word.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return word == "figure" || word == "fig." || word == "fig" || word == "table" || word == "algorithm" || word == "listing";
}

inline bool is_abbreviation(std::string_view text, std::size_t period) {
    // Token ending at `period` (exclusive), letters and inner periods only.
    std::size_t b = period;
    while (b > 0 && !is_space(static_cast<unsigned char>(text[b - 1])) && text[b - 1] != '(' && text[b - 1] != '[') --b;
    std::string token(text.substr(b, period - b));
    std::transform(token.begin(), token.end(), token.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (token.size() == 1 && std::isalpha(static_cast<unsigned char>(token[0]))) return true; // initial
    if (std::find(abbreviations.begin(), abbreviations.end(), token) != abbreviations.end()) return true;
    return is_caption_label(text, b, period);
}

} // namespace detail

/// Splits text into sentence spans. A sentence ends at '.', '!' or '?'
/// (plus any closing brackets or quotes) followed by whitespace and a
/// character that is not a lowercase letter or digit; a period that ends a
/// known abbreviation or a single-letter initial never ends a sentence.
/// Newlines always end a sentence. Spans are trimmed and never empty.
inline std::vector<Span> split_sentences(std::string_view text) {
    std::vector<Span> out;
    auto push = [&](std::size_t b, std::size_t e) {
        while (b < e && is_space(static_cast<unsigned char>(text[b]))) ++b;
        while (e > b && is_space(static_cast<unsigned char>(text[e - 1]))) --e;
        if (e > b) out.push_back({b, e});
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n') {
            push(start, i);
            start = i + 1;
            continue;
        }
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t j = i + 1;
        while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
        while (j < text.size() && detail::is_closer(text[j])) ++j;
        if (j < text.size() && !(text[j] == ' ' || text[j] == '\t' || text[j] == '\r' || text[j] == '\n')) continue;
        std::size_t k = j;
        while (k < text.size() && (text[k] == ' ' || text[k] == '\t' || text[k] == '\r')) ++k;
        if (k < text.size()) {
            const auto next = static_cast<unsigned char>(text[k]);
            if (std::islower(next) || std::isdigit(next)) continue;
        }
        if (c == '.' && detail::is_abbreviation(text, i)) continue;
        push(start, j);
        start = j;
        i = j - 1;
    }
    push(start, text.size());
    return out;
}

/// Lowercase alphanumeric word set used for vocabulary overlap.
inline std::vector<std::string> content_words(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        if (current.size() >= 3) out.push_back(current);
        current.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || c >= 0x80) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

} // namespace treereader
