#pragma once

// Locates a key point's evidence quote inside its source text. Matching runs
// exact, then normalized (NFC, casefold, collapsed whitespace, no surrounding
// quotes), then a fuzzy best-window search scored by normalized edit
// similarity. A failed match is a value (Unmatched), never an exception.

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "text.hpp"

namespace treereader {

enum class MatchKind { Exact, Normalized, Fuzzy, Unmatched };

inline constexpr std::string_view to_string(MatchKind k) noexcept {
    switch (k) {
    case MatchKind::Exact: return "exact";
    case MatchKind::Normalized: return "normalized";
    case MatchKind::Fuzzy: return "fuzzy";
    case MatchKind::Unmatched: return "unmatched";
    }
    return "?";
}

inline constexpr double default_fuzzy_threshold = 0.85;

struct Anchor {
    std::string target_node_id;
    std::size_t char_start = 0; // byte offsets into the target text
    std::size_t char_end = 0;
    MatchKind match_kind = MatchKind::Unmatched;
    double similarity = 0.0;

    friend bool operator==(const Anchor&, const Anchor&) = default;
};

struct WindowMatch {
    Span span;
    double similarity = 0.0;

    friend bool operator==(const WindowMatch&, const WindowMatch&) = default;
};

/// Levenshtein distance over code points.
inline std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

/// 1 - distance / max(length); two empty strings are identical.
inline double edit_similarity(std::u32string_view a, std::u32string_view b) {
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

namespace detail {

struct CodePoints {
    std::u32string cps;
    std::vector<std::size_t> byte_offset; // size cps.size() + 1
};

inline CodePoints decode_with_offsets(std::string_view s) {
    CodePoints out;
    out.cps.reserve(s.size());
    out.byte_offset.reserve(s.size() + 1);
    for (std::size_t i = 0; i < s.size();) {
        const auto d = utf8::decode(s, i);
        out.cps.push_back(d.cp);
        out.byte_offset.push_back(i);
        i += d.length;
    }
    out.byte_offset.push_back(s.size());
    return out;
}

// Window length bounds, in code points, for an evidence of `length`.
inline std::pair<std::size_t, std::size_t> window_bounds(std::size_t length) {
    const std::size_t lo = std::max<std::size_t>(1, (length * 8 + 9) / 10); // ceil(0.8 L)
    const std::size_t hi = std::max(lo, length * 12 / 10);                  // floor(1.2 L)
    return {lo, hi};
}

struct Candidate {
    std::size_t start = 0;
    std::size_t end = 0;
    std::size_t distance = 0;
    std::size_t longest = 1; // max(evidence, window); similarity = 1 - distance / longest
    bool valid = false;

    [[nodiscard]] double similarity() const {
        return 1.0 - static_cast<double>(distance) / static_cast<double>(longest);
    }
};

// Strictly better: higher similarity, then earlier start, then shorter.
inline bool better(const Candidate& a, const Candidate& b) {
    if (!b.valid) return a.valid;
    if (!a.valid) return false;
    const auto lhs = a.distance * b.longest;
    const auto rhs = b.distance * a.longest;
    if (lhs != rhs) return lhs < rhs;
    if (a.start != b.start) return a.start < b.start;
    return a.end - a.start < b.end - b.start;
}

// For one start position, computes the distance from `evidence` to every
// window target[start, start + m) with m <= max_len and offers the ones
// accepted by `is_end` to `best`.
template <typename EndPredicate>
void scan_from(std::u32string_view evidence, std::u32string_view target, std::size_t start, std::size_t lo,
               std::size_t hi, EndPredicate&& is_end, Candidate& best) {
    const std::size_t L = evidence.size();
    const std::size_t max_len = std::min(hi, target.size() - start);
    if (max_len < lo) return;
    std::vector<std::size_t> col(L + 1);
    for (std::size_t i = 0; i <= L; ++i) col[i] = i;
    for (std::size_t m = 1; m <= max_len; ++m) {
        const char32_t t = target[start + m - 1];
        std::size_t diag = col[0];
        col[0] = m;
        for (std::size_t i = 1; i <= L; ++i) {
            const std::size_t left = col[i];
            col[i] = std::min({col[i] + 1, col[i - 1] + 1, diag + (evidence[i - 1] == t ? 0 : 1)});
            diag = left;
        }
        if (m >= lo && is_end(start + m)) {
            Candidate c{start, start + m, col[L], std::max(L, m), true};
            if (better(c, best)) best = c;
        }
    }
}

inline std::vector<bool> token_flags(std::u32string_view cps, bool want_starts) {
    std::vector<bool> flags(cps.size() + 1, false);
    for (std::size_t i = 0; i < cps.size(); ++i) {
        const bool space = is_space(cps[i]);
        const bool prev_space = i == 0 || is_space(cps[i - 1]);
        const bool next_space = i + 1 == cps.size() || is_space(cps[i + 1]);
        if (want_starts && !space && prev_space) flags[i] = true;
        if (!want_starts && !space && next_space) flags[i + 1] = true;
    }
    return flags;
}

inline Candidate best_token_window(std::u32string_view evidence, std::u32string_view target) {
    Candidate best;
    if (evidence.empty() || target.empty()) return best;
    const auto [lo, hi] = window_bounds(evidence.size());
    const auto starts = token_flags(target, true);
    const auto ends = token_flags(target, false);
    for (std::size_t s = 0; s < target.size(); ++s) {
        if (!starts[s]) continue;
        scan_from(evidence, target, s, lo, hi, [&](std::size_t e) { return ends[e]; }, best);
    }
    return best;
}

// Character-level search within one token of the token-aligned window's
// edges. Token alignment can miss the optimum when an edit lands on the
// first or last character of the quote.
inline Candidate refine(std::u32string_view evidence, std::u32string_view target, const Candidate& seed) {
    if (!seed.valid) return seed;
    const auto [lo, hi] = window_bounds(evidence.size());
    const auto starts = token_flags(target, true);
    const auto ends = token_flags(target, false);

    std::size_t s_lo = seed.start;
    if (s_lo > 0) {
        --s_lo;
        while (s_lo > 0 && !starts[s_lo]) --s_lo;
    }
    std::size_t s_hi = seed.start + 1;
    while (s_hi < target.size() && !starts[s_hi]) ++s_hi;
    s_hi = std::min(s_hi, target.size() - 1);

    std::size_t e_lo = seed.end - 1;
    while (e_lo > 0 && !ends[e_lo]) --e_lo;
    std::size_t e_hi = seed.end + 1;
    while (e_hi < target.size() && !ends[e_hi]) ++e_hi;
    e_hi = std::min(e_hi, target.size());

    Candidate best = seed;
    for (std::size_t s = s_lo; s <= s_hi; ++s) {
        scan_from(evidence, target, s, lo, hi, [&](std::size_t e) { return e >= e_lo && e <= e_hi; }, best);
    }
    return best;
}

// Smallest edit distance from `evidence` to any substring of `target`
// (free start and end in the target).
inline std::size_t min_substring_distance(std::u32string_view evidence, std::u32string_view target) {
    const std::size_t L = evidence.size();
    std::vector<std::size_t> col(L + 1);
    for (std::size_t i = 0; i <= L; ++i) col[i] = i;
    std::size_t best = col[L];
    for (const char32_t t : target) {
        std::size_t diag = col[0];
        col[0] = 0;
        for (std::size_t i = 1; i <= L; ++i) {
            const std::size_t left = col[i];
            col[i] = std::min({col[i] + 1, col[i - 1] + 1, diag + (evidence[i - 1] == t ? 0 : 1)});
            diag = left;
        }
        best = std::min(best, col[L]);
    }
    return best;
}

// Every window, no token alignment.
inline Candidate best_char_window(std::u32string_view evidence, std::u32string_view target) {
    Candidate best;
    if (evidence.empty() || target.empty()) return best;
    const auto [lo, hi] = window_bounds(evidence.size());
    for (std::size_t s = 0; s < target.size(); ++s) {
        scan_from(evidence, target, s, lo, hi, [](std::size_t) { return true; }, best);
    }
    return best;
}

inline bool is_quote(char32_t cp) noexcept {
    return cp == U'"' || cp == U'\'' || cp == 0x201C || cp == 0x201D || cp == 0x2018 || cp == 0x2019 ||
           cp == 0xAB || cp == 0xBB || cp == 0x201E || cp == 0x201A;
}

inline std::string strip_surrounding_quotes(std::string_view s) {
    std::u32string cps = utf8::to_u32(s);
    std::size_t b = 0, e = cps.size();
    auto skip_space_front = [&] { while (b < e && is_space(cps[b])) ++b; };
    auto skip_space_back = [&] { while (e > b && is_space(cps[e - 1])) --e; };
    skip_space_front();
    skip_space_back();
    while (b < e && is_quote(cps[b])) ++b;
    while (e > b && is_quote(cps[e - 1])) --e;
    return utf8::from_u32(std::u32string_view(cps).substr(b, e - b));
}

} // namespace detail

/// Best window of `target` for `evidence` among windows whose length is
/// within [0.8, 1.2] x |evidence| code points and whose edges sit on token
/// boundaries. Ties go to the earliest start, then the shortest window.
/// Returns a zero-length span and similarity 0 when no window fits.
inline WindowMatch best_window(std::string_view evidence, std::string_view target) {
    if (evidence.empty() || target.empty()) throw std::invalid_argument("best_window: empty input");
    const auto ev = detail::decode_with_offsets(evidence);
    const auto tg = detail::decode_with_offsets(target);
    const auto best = detail::best_token_window(ev.cps, tg.cps);
    if (!best.valid) return {};
    return {{tg.byte_offset[best.start], tg.byte_offset[best.end]}, best.similarity()};
}

/// Resolves `evidence` to a span of `target`; spans are byte offsets into
/// `target`. Similarity at or above `threshold` is a match.
inline Anchor anchor_evidence(std::string_view evidence, std::string_view target, std::string target_node_id = {},
                              double threshold = default_fuzzy_threshold) {
    if (evidence.empty()) throw std::invalid_argument("anchor_evidence: empty evidence");
    Anchor anchor;
    anchor.target_node_id = std::move(target_node_id);

    if (const std::size_t pos = target.find(evidence); pos != std::string_view::npos) {
        anchor.char_start = pos;
        anchor.char_end = pos + evidence.size();
        anchor.match_kind = MatchKind::Exact;
        anchor.similarity = 1.0;
        return anchor;
    }

    const std::string needle = normalized(detail::strip_surrounding_quotes(evidence), {.casefold = true});
    const NormalizedText haystack = normalize_text(target, {.casefold = true});
    if (needle.empty() || haystack.text.empty()) return anchor;

    if (const std::size_t pos = haystack.text.find(needle); pos != std::string::npos) {
        const Span raw = haystack.offsets.to_raw({pos, pos + needle.size()});
        anchor.char_start = raw.start;
        anchor.char_end = raw.end;
        anchor.match_kind = MatchKind::Normalized;
        anchor.similarity = 1.0;
        return anchor;
    }

    const auto ev = detail::decode_with_offsets(needle);
    const auto tg = detail::decode_with_offsets(haystack.text);
    // No window can beat 1 - d_min / longest_window, so a failing bound
    // skips the window search entirely.
    const std::size_t floor_distance = detail::min_substring_distance(ev.cps, tg.cps);
    const std::size_t longest_window = detail::window_bounds(ev.cps.size()).second;
    if (1.0 - static_cast<double>(floor_distance) / static_cast<double>(longest_window) < threshold) {
        anchor.similarity = 0.0;
        return anchor;
    }
    auto best = detail::refine(ev.cps, tg.cps, detail::best_token_window(ev.cps, tg.cps));
    if (!best.valid || best.similarity() < threshold) best = detail::best_char_window(ev.cps, tg.cps);
    if (!best.valid) return anchor;
    anchor.similarity = best.similarity();
    if (anchor.similarity < threshold) return anchor;

    const Span raw = haystack.offsets.to_raw({tg.byte_offset[best.start], tg.byte_offset[best.end]});
    anchor.char_start = raw.start;
    anchor.char_end = raw.end;
    anchor.match_kind = MatchKind::Fuzzy;
    return anchor;
}

} // namespace treereader
