#pragma once

// A forgiving HTML tokenizer. It never fails: unterminated tags, stray '<'
// and unknown entities degrade to text.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "text.hpp"

namespace treereader::html {

enum class TokenKind { Text, StartTag, EndTag, Comment, Doctype };

struct Token {
    TokenKind kind = TokenKind::Text;
    std::string name; // lowercase tag name
    std::string text; // decoded text for Text tokens
    std::vector<std::pair<std::string, std::string>> attributes;
    bool self_closing = false;

    [[nodiscard]] std::string_view attribute(std::string_view key) const {
        for (const auto& [k, v] : attributes) {
            if (k == key) return v;
        }
        return {};
    }
};

namespace detail {

inline const std::unordered_map<std::string_view, char32_t>& named_entities() {
    static const std::unordered_map<std::string_view, char32_t> table = {
        {"amp", U'&'},      {"lt", U'<'},        {"gt", U'>'},       {"quot", U'"'},
        {"apos", U'\''},    {"nbsp", 0xA0},      {"ensp", 0x2002},   {"emsp", 0x2003},
        {"thinsp", 0x2009}, {"hairsp", 0x200A},  {"zwnj", 0x200C},   {"zwj", 0x200D},
        {"ndash", 0x2013},  {"mdash", 0x2014},   {"minus", 0x2212},  {"hellip", 0x2026},
        {"lsquo", 0x2018},  {"rsquo", 0x2019},   {"ldquo", 0x201C},  {"rdquo", 0x201D},
        {"laquo", 0xAB},    {"raquo", 0xBB},     {"bull", 0x2022},   {"middot", 0xB7},
        {"times", 0xD7},    {"divide", 0xF7},    {"plusmn", 0xB1},   {"deg", 0xB0},
        {"micro", 0xB5},    {"le", 0x2264},      {"ge", 0x2265},     {"ne", 0x2260},
        {"asymp", 0x2248},  {"approx", 0x2248},  {"sim", 0x223C},    {"infin", 0x221E},
        {"sum", 0x2211},    {"prod", 0x220F},    {"radic", 0x221A},  {"prime", 0x2032},
        {"copy", 0xA9},     {"reg", 0xAE},       {"trade", 0x2122},  {"sect", 0xA7},
        {"para", 0xB6},     {"dagger", 0x2020},  {"Dagger", 0x2021}, {"larr", 0x2190},
        {"rarr", 0x2192},   {"uarr", 0x2191},    {"darr", 0x2193},   {"harr", 0x2194},
        {"alpha", 0x3B1},   {"beta", 0x3B2},     {"gamma", 0x3B3},   {"delta", 0x3B4},
        {"epsilon", 0x3B5}, {"zeta", 0x3B6},     {"eta", 0x3B7},     {"theta", 0x3B8},
        {"iota", 0x3B9},    {"kappa", 0x3BA},    {"lambda", 0x3BB},  {"mu", 0x3BC},
        {"nu", 0x3BD},      {"xi", 0x3BE},       {"pi", 0x3C0},      {"rho", 0x3C1},
        {"sigma", 0x3C3},   {"tau", 0x3C4},      {"phi", 0x3C6},     {"chi", 0x3C7},
        {"psi", 0x3C8},     {"omega", 0x3C9},    {"Delta", 0x394},   {"Sigma", 0x3A3},
        {"Omega", 0x3A9},   {"eacute", 0xE9},    {"egrave", 0xE8},   {"aacute", 0xE1},
        {"agrave", 0xE0},   {"oacute", 0xF3},    {"uacute", 0xFA},   {"iacute", 0xED},
        {"ouml", 0xF6},     {"uuml", 0xFC},      {"auml", 0xE4},     {"ccedil", 0xE7},
        {"ntilde", 0xF1},   {"szlig", 0xDF},     {"Eacute", 0xC9},   {"Ouml", 0xD6},
        {"Uuml", 0xDC},     {"Auml", 0xC4},
    };
    return table;
}

inline bool is_name_char(char c) noexcept {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':' || c == '.';
}

inline std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace detail

/// Replaces character references. Unknown or malformed references are kept
/// verbatim.
inline std::string decode_entities(std::string_view in) {
    std::string out;
    out.reserve(in.size());
    for (std::size_t i = 0; i < in.size();) {
        if (in[i] != '&') {
            out.push_back(in[i++]);
            continue;
        }
        const std::size_t semi = in.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 12) {
            out.push_back(in[i++]);
            continue;
        }
        const std::string_view body = in.substr(i + 1, semi - i - 1);
        char32_t cp = 0;
        bool ok = false;
        if (!body.empty() && body[0] == '#') {
            const bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
            const std::string_view digits = body.substr(hex ? 2 : 1);
            if (!digits.empty() && digits.size() <= 8) {
                ok = std::all_of(digits.begin(), digits.end(), [hex](char c) {
                    return hex ? std::isxdigit(static_cast<unsigned char>(c)) != 0
                               : std::isdigit(static_cast<unsigned char>(c)) != 0;
                });
                if (ok) {
                    cp = static_cast<char32_t>(std::stoul(std::string(digits), nullptr, hex ? 16 : 10));
                    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) cp = utf8::replacement;
                }
            }
        } else {
            const auto& table = detail::named_entities();
            if (auto it = table.find(body); it != table.end()) {
                cp = it->second;
                ok = true;
            }
        }
        if (!ok) {
            out.push_back(in[i++]);
            continue;
        }
        utf8::append(out, cp);
        i = semi + 1;
    }
    return out;
}

/// Elements whose content is raw text up to the matching end tag.
inline bool is_raw_text_element(std::string_view name) noexcept {
    return name == "script" || name == "style" || name == "textarea" || name == "title" ||
           name == "xmp" || name == "noscript";
}

inline bool is_void_element(std::string_view name) noexcept {
    static constexpr std::string_view voids[] = {"area", "base", "br", "col", "embed", "hr", "img",
                                                 "input", "link", "meta", "param", "source", "track",
                                                 "wbr"};
    return std::find(std::begin(voids), std::end(voids), name) != std::end(voids);
}

inline std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> tokens;
    std::string pending_text;
    auto flush_text = [&] {
        if (pending_text.empty()) return;
        Token t;
        t.kind = TokenKind::Text;
        t.text = decode_entities(pending_text);
        tokens.push_back(std::move(t));
        pending_text.clear();
    };

    std::size_t i = 0;
    const std::size_t n = src.size();
    while (i < n) {
        if (src[i] != '<' || i + 1 >= n) {
            pending_text.push_back(src[i++]);
            continue;
        }
        const char next = src[i + 1];
        if (src.substr(i, 4) == "<!--") {
            flush_text();
            const std::size_t close = src.find("-->", i + 4);
            Token t;
            t.kind = TokenKind::Comment;
            t.text = std::string(src.substr(i + 4, (close == std::string_view::npos ? n : close) - i - 4));
            tokens.push_back(std::move(t));
            i = close == std::string_view::npos ? n : close + 3;
            continue;
        }
        if (next == '!' || next == '?') {
            flush_text();
            const std::size_t close = src.find('>', i + 2);
            Token t;
            t.kind = TokenKind::Doctype;
            t.text = std::string(src.substr(i + 2, (close == std::string_view::npos ? n : close) - i - 2));
            tokens.push_back(std::move(t));
            i = close == std::string_view::npos ? n : close + 1;
            continue;
        }
        const bool end_tag = next == '/';
        const std::size_t name_start = i + (end_tag ? 2 : 1);
        if (name_start >= n || !std::isalpha(static_cast<unsigned char>(src[name_start]))) {
            pending_text.push_back(src[i++]);
            continue;
        }
        std::size_t j = name_start;
        while (j < n && detail::is_name_char(src[j])) ++j;
        Token tag;
        tag.kind = end_tag ? TokenKind::EndTag : TokenKind::StartTag;
        tag.name = detail::lower(src.substr(name_start, j - name_start));

        // Attributes, honouring quotes so that '>' inside values is not a terminator.
        while (j < n && src[j] != '>') {
            if (std::isspace(static_cast<unsigned char>(src[j]))) {
                ++j;
                continue;
            }
            if (src[j] == '/') {
                tag.self_closing = true;
                ++j;
                continue;
            }
            const std::size_t key_start = j;
            while (j < n && src[j] != '=' && src[j] != '>' && src[j] != '/' &&
                   !std::isspace(static_cast<unsigned char>(src[j]))) {
                ++j;
            }
            std::string key = detail::lower(src.substr(key_start, j - key_start));
            std::string value;
            while (j < n && std::isspace(static_cast<unsigned char>(src[j]))) ++j;
            if (j < n && src[j] == '=') {
                ++j;
                while (j < n && std::isspace(static_cast<unsigned char>(src[j]))) ++j;
                if (j < n && (src[j] == '"' || src[j] == '\'')) {
                    const char quote = src[j++];
                    const std::size_t value_end = src.find(quote, j);
                    const std::size_t stop = value_end == std::string_view::npos ? n : value_end;
                    value = decode_entities(src.substr(j, stop - j));
                    j = stop == n ? n : stop + 1;
                } else {
                    const std::size_t value_start = j;
                    while (j < n && src[j] != '>' && !std::isspace(static_cast<unsigned char>(src[j]))) ++j;
                    value = decode_entities(src.substr(value_start, j - value_start));
                }
            }
            if (!key.empty()) tag.attributes.emplace_back(std::move(key), std::move(value));
        }
        if (tag.self_closing) tag.self_closing = !end_tag;
        i = j < n ? j + 1 : n;
        flush_text();
        const bool raw = tag.kind == TokenKind::StartTag && !tag.self_closing && is_raw_text_element(tag.name);
        const std::string raw_name = tag.name;
        tokens.push_back(std::move(tag));

        if (raw) {
            // Case-insensitive search for the closing tag.
            const std::string closing = "</" + raw_name;
            std::size_t k = i;
            std::size_t found = n;
            while (k < n) {
                const std::size_t lt = src.find("</", k);
                if (lt == std::string_view::npos) break;
                if (detail::lower(src.substr(lt, closing.size())) == closing) {
                    found = lt;
                    break;
                }
                k = lt + 2;
            }
            Token body;
            body.kind = TokenKind::Text;
            body.text = raw_name == "title" || raw_name == "textarea"
                            ? decode_entities(src.substr(i, found - i))
                            : std::string(src.substr(i, found - i));
            tokens.push_back(std::move(body));
            if (found < n) {
                const std::size_t gt = src.find('>', found);
                Token close;
                close.kind = TokenKind::EndTag;
                close.name = raw_name;
                tokens.push_back(std::move(close));
                i = gt == std::string_view::npos ? n : gt + 1;
            } else {
                i = n;
            }
        }
    }
    flush_text();
    return tokens;
}

} // namespace treereader::html
